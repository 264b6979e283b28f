//! Raster containers shared by every pipeline stage.
//!
//! All containers are row-major with `(x, y)` addressing, immutable once
//! constructed by the pipeline, and safe to share across threads. Metric and
//! filter code works on real-valued [`GrayImage`] rasters; 8-bit quantization
//! happens only at I/O boundaries.

use crate::{Error, Result};

/// Marker for an invalid/hole depth sample.
pub const INVALID_DEPTH: u16 = 0;

fn check_dims(width: usize, height: usize, samples_per_px: usize) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(samples_per_px))
        .filter(|&n| n <= i32::MAX as usize)
        .ok_or(Error::DimensionOverflow { width, height })
}

/// 8-bit RGB image, interleaved row-major triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        let len = check_dims(width, height, 3)?;
        Ok(Self {
            width,
            height,
            samples: vec![0; len],
        })
    }

    pub fn from_samples(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        let len = check_dims(width, height, 3)?;
        if samples.len() != len {
            return Err(Error::SampleCountMismatch {
                expected: len,
                got: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.samples[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Real-valued single-channel raster. Every sample is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        let len = check_dims(width, height, 1)?;
        Ok(Self {
            width,
            height,
            samples: vec![0.0; len],
        })
    }

    pub fn from_samples(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        let len = check_dims(width, height, 1)?;
        if samples.len() != len {
            return Err(Error::SampleCountMismatch {
                expected: len,
                got: samples.len(),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.samples[y * self.width + x] = v;
    }

    /// Clamped lookup used by replicate-padded convolutions.
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }
}

/// Per-pixel scene distance in millimeters; `0` marks an invalid sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<u16>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        let len = check_dims(width, height, 1)?;
        Ok(Self {
            width,
            height,
            depth: vec![INVALID_DEPTH; len],
        })
    }

    pub fn from_samples(width: usize, height: usize, depth: Vec<u16>) -> Result<Self> {
        let len = check_dims(width, height, 1)?;
        if depth.len() != len {
            return Err(Error::SampleCountMismatch {
                expected: len,
                got: depth.len(),
            });
        }
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[u16] {
        &self.depth
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.depth[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.depth[y * self.width + x] = v;
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.get(x, y) != INVALID_DEPTH
    }

    pub fn hole_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d == INVALID_DEPTH).count()
    }

    pub fn valid_count(&self) -> usize {
        self.depth.len() - self.hole_count()
    }
}

/// ITU-R BT.601 luma conversion. Output keeps full real precision.
pub fn rgb_to_gray(img: &ColorImage) -> GrayImage {
    let mut samples = Vec::with_capacity(img.width() * img.height());
    for px in img.samples().chunks_exact(3) {
        samples.push(0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64);
    }
    GrayImage {
        width: img.width(),
        height: img.height(),
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_of_white_is_255() {
        let img = ColorImage::from_samples(2, 2, vec![255; 12]).unwrap();
        let g = rgb_to_gray(&img);
        for &v in g.samples() {
            assert!((v - 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gray_of_pure_blue_is_bt601_weight() {
        let mut img = ColorImage::new(3, 1).unwrap();
        for x in 0..3 {
            img.set_pixel(x, 0, [0, 0, 255]);
        }
        let g = rgb_to_gray(&img);
        for &v in g.samples() {
            assert!((v - 29.07).abs() < 1e-9, "got {v}");
        }
    }

    #[test]
    fn gray_matches_per_pixel_hand_computation() {
        // Independent scalar oracle over every pixel of a fixed 4x4 image.
        let mut data = Vec::new();
        let mut state = 0x2545f4914f6cdd1du64;
        for _ in 0..48 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            data.push((state >> 56) as u8);
        }
        let img = ColorImage::from_samples(4, 4, data.clone()).unwrap();
        let g = rgb_to_gray(&img);
        for (i, px) in data.chunks_exact(3).enumerate() {
            let expected = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            assert_eq!(g.samples()[i], expected);
        }
    }

    #[test]
    fn gray_is_bounded() {
        let img = ColorImage::from_samples(1, 2, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let g = rgb_to_gray(&img);
        assert!(g.samples().iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(matches!(
            ColorImage::new(0, 4),
            Err(Error::InvalidDimensions { .. })
        ));
        assert!(matches!(
            DepthMap::from_samples(3, 2, vec![0; 5]),
            Err(Error::SampleCountMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_samples_rejected() {
        assert!(matches!(
            GrayImage::from_samples(2, 1, vec![1.0, f64::NAN]),
            Err(Error::NonFiniteSample(1))
        ));
    }
}
