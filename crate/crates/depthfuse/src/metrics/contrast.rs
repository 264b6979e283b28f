//! Human-perception fusion metric built on band-limited local contrast.
//!
//! Five steps: contrast sensitivity filtering in the frequency domain, local
//! (Peli) contrast as a ratio of two Gaussian-filtered versions, a masking
//! nonlinearity, a saliency split between the two sources, and a global
//! quality map whose mean is the metric value.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::{fft2, freq_index, ifft2};
use crate::filter;
use crate::raster::GrayImage;
use crate::{ensure_same_size, Error, Result};

/// Contrast sensitivity filter shapes, given in terms of radial frequency in
/// cycles per padded image (the reference convention treats the padded image
/// as spanning one visual degree).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsfFilter {
    /// Difference of Gaussians (the default).
    Dog,
    MannosSakrison,
    Barten,
}

/// Masking and pyramid constants of the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcbParams {
    pub csf: CsfFilter,
    /// Standard deviation of the finer contrast pyramid level; the coarser
    /// level uses twice this.
    pub sigma_k: f64,
    pub t: f64,
    pub h: f64,
    pub p: f64,
    pub q: f64,
    pub z: f64,
}

impl Default for QcbParams {
    fn default() -> Self {
        Self {
            csf: CsfFilter::Dog,
            sigma_k: 2.0,
            t: 1.0,
            h: 1.0,
            p: 3.0,
            q: 2.0,
            z: 0.0001,
        }
    }
}

impl QcbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_k.is_finite() && self.sigma_k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_k must be positive (got {})",
                self.sigma_k
            )));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "masking constant z must be positive (got {})",
                self.z
            )));
        }
        Ok(())
    }
}

fn csf_gain(r: f64, filter: CsfFilter) -> f64 {
    match filter {
        CsfFilter::Dog => {
            const F0: f64 = 15.3870;
            const F1: f64 = 1.3456;
            const A: f64 = 0.7622;
            (-(r / F0) * (r / F0)).exp() - A * (-(r / F1) * (r / F1)).exp()
        }
        CsfFilter::MannosSakrison => 2.6 * (0.0192 + 0.114 * r) * (-(0.114 * r).powf(1.1)).exp(),
        CsfFilter::Barten => {
            // Approximation at 100 cd/m^2 surround luminance, normalized to
            // unit peak (525.1536 at ~3.25 cycles).
            let a = 440.0 * (1.007f64).powf(-0.2);
            let b = 0.3 * (2.0f64).powf(0.15);
            a * r * (-b * r).exp() * (1.0 + 0.06 * (b * r).exp()).sqrt() / 525.1535977251563
        }
    }
}

/// CSF filtering in the frequency domain over a power-of-two canvas
/// (replicate-filled around the centered image), cropped back to the
/// original size. The transform itself extends the canvas periodically.
fn csf_filter(img: &GrayImage, filter: CsfFilter) -> Vec<f64> {
    let (w, h) = img.size();
    let p = w.max(h).next_power_of_two();
    let (off_x, off_y) = ((p - w) / 2, (p - h) / 2);
    let mut buf = vec![Complex64::default(); p * p];
    for y in 0..p {
        let sy = y.saturating_sub(off_y).min(h - 1);
        for x in 0..p {
            let sx = x.saturating_sub(off_x).min(w - 1);
            buf[y * p + x] = Complex64::new(img.get(sx, sy), 0.0);
        }
    }
    fft2(&mut buf, p, p);
    for j in 0..p {
        let fy = freq_index(j, p) as f64;
        for i in 0..p {
            let fx = freq_index(i, p) as f64;
            let r = (fx * fx + fy * fy).sqrt();
            buf[j * p + i] *= csf_gain(r, filter);
        }
    }
    ifft2(&mut buf, p, p);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(buf[(y + off_y) * p + x + off_x].re);
        }
    }
    out
}

/// Masked Peli contrast of one CSF-filtered image.
fn masked_contrast(filtered: &GrayImage, params: &QcbParams) -> Vec<f64> {
    let fine = filter::separable(filtered, &filter::gaussian_kernel(params.sigma_k));
    let coarse = filter::separable(filtered, &filter::gaussian_kernel(2.0 * params.sigma_k));
    fine.samples()
        .iter()
        .zip(coarse.samples())
        .map(|(&num, &den)| {
            let c = if den.abs() < 1e-12 {
                0.0
            } else {
                num / den - 1.0
            };
            let c = c.abs();
            params.t * c.powf(params.p) / (params.h * c.powf(params.q) + params.z)
        })
        .collect()
}

/// Mean of the global quality map: saliency-weighted contrast preservation
/// of each source in the fused image. Preservation is the smaller-to-larger
/// ratio of masked contrasts, 1 when both vanish; saliency defaults to an
/// even split when both sources carry no contrast.
pub fn q_cb(a: &GrayImage, b: &GrayImage, f: &GrayImage, params: &QcbParams) -> Result<f64> {
    params.validate()?;
    ensure_same_size(a.size(), f.size())?;
    ensure_same_size(b.size(), f.size())?;
    let (w, h) = a.size();
    let ca = masked_contrast(
        &GrayImage::from_samples(w, h, csf_filter(a, params.csf))?,
        params,
    );
    let cb = masked_contrast(
        &GrayImage::from_samples(w, h, csf_filter(b, params.csf))?,
        params,
    );
    let cf = masked_contrast(
        &GrayImage::from_samples(w, h, csf_filter(f, params.csf))?,
        params,
    );

    let preserved = |src: f64, fused: f64| {
        if src == 0.0 && fused == 0.0 {
            1.0
        } else {
            src.min(fused) / src.max(fused)
        }
    };
    let mut total = 0.0;
    for i in 0..w * h {
        let sa = ca[i] * ca[i];
        let sb = cb[i] * cb[i];
        let lambda_a = if sa + sb > 0.0 { sa / (sa + sb) } else { 0.5 };
        let lambda_b = 1.0 - lambda_a;
        total += lambda_a * preserved(ca[i], cf[i]) + lambda_b * preserved(cb[i], cf[i]);
    }
    Ok(total / (w * h) as f64)
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
        let x = noise(40, 30, 4);
        let v = q_cb(&x, &x, &x, &QcbParams::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "got {v}");
    }

    #[test]
    fn constant_images_hit_the_degenerate_conventions() {
        let c = GrayImage::from_samples(16, 16, vec![120.0; 256]).unwrap();
        let v = q_cb(&c, &c, &c, &QcbParams::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn sharper_fusion_scores_higher() {
        let a = noise(48, 48, 9);
        let b = crate::filter::gaussian_blur(&a, 1.5);
        let f_sharp = a.clone();
        let f_soft = crate::filter::gaussian_blur(&a, 3.0);
        let hi = q_cb(&a, &b, &f_sharp, &QcbParams::default()).unwrap();
        let lo = q_cb(&a, &b, &f_soft, &QcbParams::default()).unwrap();
        assert!(hi > lo, "hi {hi} vs lo {lo}");
    }

    #[test]
    fn all_csf_choices_run_and_keep_identity() {
        let x = noise(32, 32, 11);
        for csf in [CsfFilter::Dog, CsfFilter::MannosSakrison, CsfFilter::Barten] {
            let v = q_cb(
                &x,
                &x,
                &x,
                &QcbParams {
                    csf,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!((v - 1.0).abs() < 1e-3, "{csf:?} got {v}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = noise(16, 16, 1);
        let b = noise(16, 8, 2);
        assert!(q_cb(&a, &b, &a, &QcbParams::default()).is_err());
    }
}
