//! Structural-similarity fusion metric: a salience-weighted combination of
//! windowed SSIM scores against the two sources, switching to a max rule
//! where the sources disagree.

use crate::raster::GrayImage;
use crate::{ensure_same_size, Error, Result};

const WINDOW: usize = 7;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
/// Source-agreement threshold for switching between the weighted and max
/// combination rules.
const AGREEMENT: f64 = 0.75;

/// Summed-area table with one row/column of zero padding.
struct Sat {
    width: usize,
    sums: Vec<f64>,
}

impl Sat {
    fn build(w: usize, h: usize, f: impl Fn(usize) -> f64) -> Self {
        let sw = w + 1;
        let mut sums = vec![0.0; sw * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f(y * w + x);
                sums[(y + 1) * sw + x + 1] = sums[y * sw + x + 1] + row;
            }
        }
        Self { width: sw, sums }
    }

    /// Sum over the window with top-left `(x, y)` and side `WINDOW`.
    fn window(&self, x: usize, y: usize) -> f64 {
        let (x1, y1) = (x + WINDOW, y + WINDOW);
        self.sums[y1 * self.width + x1]
            - self.sums[y * self.width + x1]
            - self.sums[y1 * self.width + x]
            + self.sums[y * self.width + x]
    }
}

struct Moments {
    n: f64,
    sum_a: Sat,
    sum_b: Sat,
    sum_f: Sat,
    sum_aa: Sat,
    sum_bb: Sat,
    sum_ff: Sat,
    sum_ab: Sat,
    sum_af: Sat,
    sum_bf: Sat,
}

struct WindowStats {
    var_a: f64,
    var_b: f64,
    ssim_ab: f64,
    ssim_af: f64,
    ssim_bf: f64,
}

impl Moments {
    fn window(&self, x: usize, y: usize) -> WindowStats {
        let n = self.n;
        let ma = self.sum_a.window(x, y) / n;
        let mb = self.sum_b.window(x, y) / n;
        let mf = self.sum_f.window(x, y) / n;
        let var_a = (self.sum_aa.window(x, y) / n - ma * ma).max(0.0);
        let var_b = (self.sum_bb.window(x, y) / n - mb * mb).max(0.0);
        let var_f = (self.sum_ff.window(x, y) / n - mf * mf).max(0.0);
        let cov_ab = self.sum_ab.window(x, y) / n - ma * mb;
        let cov_af = self.sum_af.window(x, y) / n - ma * mf;
        let cov_bf = self.sum_bf.window(x, y) / n - mb * mf;
        let ssim = |mx: f64, my: f64, vx: f64, vy: f64, cxy: f64| {
            ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))
        };
        WindowStats {
            var_a,
            var_b,
            ssim_ab: ssim(ma, mb, var_a, var_b, cov_ab),
            ssim_af: ssim(ma, mf, var_a, var_f, cov_af),
            ssim_bf: ssim(mb, mf, var_b, var_f, cov_bf),
        }
    }
}

/// Mean over all 7x7 windows of the combined structural similarity. Window
/// salience is local variance; where both vanish the weight splits evenly.
pub fn q_y(a: &GrayImage, b: &GrayImage, f: &GrayImage) -> Result<f64> {
    ensure_same_size(a.size(), f.size())?;
    ensure_same_size(b.size(), f.size())?;
    let (w, h) = a.size();
    if w < WINDOW || h < WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: WINDOW,
            min_height: WINDOW,
        });
    }
    let (sa, sb, sf) = (a.samples(), b.samples(), f.samples());
    let moments = Moments {
        n: (WINDOW * WINDOW) as f64,
        sum_a: Sat::build(w, h, |i| sa[i]),
        sum_b: Sat::build(w, h, |i| sb[i]),
        sum_f: Sat::build(w, h, |i| sf[i]),
        sum_aa: Sat::build(w, h, |i| sa[i] * sa[i]),
        sum_bb: Sat::build(w, h, |i| sb[i] * sb[i]),
        sum_ff: Sat::build(w, h, |i| sf[i] * sf[i]),
        sum_ab: Sat::build(w, h, |i| sa[i] * sb[i]),
        sum_af: Sat::build(w, h, |i| sa[i] * sf[i]),
        sum_bf: Sat::build(w, h, |i| sb[i] * sf[i]),
    };

    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - WINDOW {
        for x in 0..=w - WINDOW {
            let s = moments.window(x, y);
            let value = if s.ssim_ab >= AGREEMENT {
                let lambda = if s.var_a + s.var_b > 0.0 {
                    s.var_a / (s.var_a + s.var_b)
                } else {
                    0.5
                };
                lambda * s.ssim_af + (1.0 - lambda) * s.ssim_bf
            } else {
                s.ssim_af.max(s.ssim_bf)
            };
            total += value;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut state = seed | 1;
        let samples = (0..w * h)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 56) as f64
            })
            .collect();
        GrayImage::from_samples(w, h, samples).unwrap()
    }

    #[test]
    fn identity_scores_one() {
        let x = noise(20, 14, 4);
        let v = q_y(&x, &x, &x).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn inverted_fusion_scores_poorly() {
        let x = noise(20, 20, 6);
        let inverted =
            GrayImage::from_samples(20, 20, x.samples().iter().map(|v| 255.0 - v).collect())
                .unwrap();
        let v = q_y(&x, &x, &inverted).unwrap();
        assert!(v < 0.2, "got {v}");
    }

    #[test]
    fn disagreeing_sources_use_max_branch() {
        // Constant A vs textured B with F = B: windows disagree, and the max
        // branch finds SSIM(B, F) = 1.
        let a = GrayImage::from_samples(16, 16, vec![128.0; 256]).unwrap();
        let b = noise(16, 16, 9);
        let v = q_y(&a, &b, &b).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn windowed_moments_match_direct_evaluation() {
        // One-window image: compare against a scalar SSIM computation.
        let a = noise(7, 7, 11);
        let b = noise(7, 7, 12);
        let f = noise(7, 7, 13);
        let direct = |x: &GrayImage, y: &GrayImage| {
            let n = 49.0;
            let mx = x.samples().iter().sum::<f64>() / n;
            let my = y.samples().iter().sum::<f64>() / n;
            let vx = x.samples().iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n;
            let vy = y.samples().iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n;
            let cxy = x
                .samples()
                .iter()
                .zip(y.samples())
                .map(|(p, q)| (p - mx) * (q - my))
                .sum::<f64>()
                / n;
            ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))
        };
        let s_ab = direct(&a, &b);
        let expected = if s_ab >= AGREEMENT {
            let va = {
                let m = a.samples().iter().sum::<f64>() / 49.0;
                a.samples().iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 49.0
            };
            let vb = {
                let m = b.samples().iter().sum::<f64>() / 49.0;
                b.samples().iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 49.0
            };
            let lambda = va / (va + vb);
            lambda * direct(&a, &f) + (1.0 - lambda) * direct(&b, &f)
        } else {
            direct(&a, &f).max(direct(&b, &f))
        };
        let v = q_y(&a, &b, &f).unwrap();
        assert!((v - expected).abs() < 1e-9, "got {v}, expected {expected}");
    }

    #[test]
    fn small_images_rejected() {
        let x = noise(6, 9, 2);
        assert!(matches!(q_y(&x, &x, &x), Err(Error::ImageTooSmall { .. })));
    }
}
