//! Spatial convolution kernels shared by the fusion, metric, and simulator
//! code. All spatial filters use replicate padding at the image border.

use crate::raster::GrayImage;

/// Normalized 1-D Gaussian taps with radius `ceil(3*sigma)`.
/// `sigma <= 0` degenerates to the identity kernel.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

fn convolve_rows(img: &GrayImage, taps: &[f64]) -> GrayImage {
    let (w, h) = img.size();
    let radius = (taps.len() / 2) as isize;
    let mut out = GrayImage::new(w, h).expect("same dims");
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * img.get_clamped(x as isize + k as isize - radius, y as isize);
            }
            out.set(x, y, acc);
        }
    }
    out
}

fn convolve_cols(img: &GrayImage, taps: &[f64]) -> GrayImage {
    let (w, h) = img.size();
    let radius = (taps.len() / 2) as isize;
    let mut out = GrayImage::new(w, h).expect("same dims");
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * img.get_clamped(x as isize, y as isize + k as isize - radius);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Separable Gaussian blur with replicate padding.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let taps = gaussian_kernel(sigma);
    convolve_cols(&convolve_rows(img, &taps), &taps)
}

/// Separable convolution with an explicit kernel (used by the Peli contrast
/// pyramid, which wants a fixed-size Gaussian).
pub fn separable(img: &GrayImage, taps: &[f64]) -> GrayImage {
    convolve_cols(&convolve_rows(img, taps), taps)
}

/// Horizontal and vertical Sobel responses.
pub fn sobel(img: &GrayImage) -> (GrayImage, GrayImage) {
    let (w, h) = img.size();
    let mut gx = GrayImage::new(w, h).expect("same dims");
    let mut gy = GrayImage::new(w, h).expect("same dims");
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| img.get_clamped(x as isize + dx, y as isize + dy);
            let sx = -p(-1, -1) + p(1, -1) - 2.0 * p(-1, 0) + 2.0 * p(1, 0) - p(-1, 1) + p(1, 1);
            let sy = -p(-1, -1) - 2.0 * p(0, -1) - p(1, -1) + p(-1, 1) + 2.0 * p(0, 1) + p(1, 1);
            gx.set(x, y, sx);
            gy.set(x, y, sy);
        }
    }
    (gx, gy)
}

/// 3x3 cross Laplacian `[0,1,0; 1,-4,1; 0,1,0]`.
pub fn laplacian(img: &GrayImage) -> GrayImage {
    let (w, h) = img.size();
    let mut out = GrayImage::new(w, h).expect("same dims");
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| img.get_clamped(x as isize + dx, y as isize + dy);
            out.set(
                x,
                y,
                p(0, -1) + p(-1, 0) + p(1, 0) + p(0, 1) - 4.0 * p(0, 0),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() / 2 {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let img = GrayImage::from_samples(8, 5, vec![42.0; 40]).unwrap();
        let out = gaussian_blur(&img, 2.0);
        for &v in out.samples() {
            assert!((v - 42.0).abs() < 1e-9);
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let img = GrayImage::from_samples(6, 6, vec![17.0; 36]).unwrap();
        assert!(laplacian(&img).samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sobel_matches_brute_force() {
        let vals: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64).collect();
        let img = GrayImage::from_samples(6, 5, vals).unwrap();
        let (gx, gy) = sobel(&img);
        let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        for y in 0..5 {
            for x in 0..6 {
                let mut ex = 0.0;
                let mut ey = 0.0;
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let v = img.get_clamped(x as isize + dx, y as isize + dy);
                        ex += v * kx[(dy + 1) as usize][(dx + 1) as usize];
                        ey += v * kx[(dx + 1) as usize][(dy + 1) as usize];
                    }
                }
                assert!((gx.get(x, y) - ex).abs() < 1e-9);
                assert!((gy.get(x, y) - ey).abs() < 1e-9);
            }
        }
    }
}
