//! Phase-congruency fusion metric.
//!
//! Image features are extracted with a bank of log-Gabor filters (4 scales,
//! 6 orientations, standard parameterization): per orientation, the filter
//! responses across scales combine into a noise-gated phase congruency map,
//! and the per-orientation maps accumulate into an overall congruency map
//! plus its principal (maximum and minimum) moments, which carry the corner
//! and edge information. The metric is the product of three correlation
//! coefficients between those feature maps, each taken as the best match
//! among the two sources and their pixelwise maximum against the fused
//! image.

use rustfft::num_complex::Complex64;

use crate::fft::{fft2, freq_index, ifft2};
use crate::raster::GrayImage;
use crate::{ensure_same_size, Error, Result};

const NSCALE: usize = 4;
const NORIENT: usize = 6;
const MIN_WAVELENGTH: f64 = 3.0;
const MULT: f64 = 2.1;
const SIGMA_ONF: f64 = 0.55;
/// Noise energy gate in standard deviations above the estimated mean.
const NOISE_K: f64 = 2.0;
const CUTOFF: f64 = 0.5;
const SHARPNESS_G: f64 = 10.0;
const EPSILON: f64 = 1e-4;
/// Covariance stabilizer of the correlation coefficients.
const CORR_C: f64 = 1e-4;
const MIN_SIZE: usize = 32;

pub(crate) struct PhaseFeatures {
    pub congruency: Vec<f64>,
    pub moment_max: Vec<f64>,
    pub moment_min: Vec<f64>,
}

fn median(values: &[f64]) -> f64 {
    let mut buf: Vec<f64> = values.to_vec();
    let mid = buf.len() / 2;
    let (_, m, _) = buf.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let upper = *m;
    if buf.len() % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub(crate) fn phase_congruency(img: &GrayImage) -> PhaseFeatures {
    let (w, h) = img.size();
    let n = w * h;

    // Frequency grid (unshifted layout), radius and orientation per bin.
    let mut radius = vec![0.0f64; n];
    let mut sin_theta = vec![0.0f64; n];
    let mut cos_theta = vec![0.0f64; n];
    for j in 0..h {
        let fy = freq_index(j, h) as f64 / h as f64;
        for i in 0..w {
            let fx = freq_index(i, w) as f64 / w as f64;
            let r = (fx * fx + fy * fy).sqrt();
            let theta = (-fy).atan2(fx);
            let idx = j * w + i;
            radius[idx] = r;
            sin_theta[idx] = theta.sin();
            cos_theta[idx] = theta.cos();
        }
    }
    radius[0] = 1.0;

    // Radial log-Gabor bands under a high-frequency rolloff. The unpaired
    // Nyquist line of even-sized grids is excluded: its +/-0.5 cycles/px
    // orientations are indistinguishable, which would make the oriented
    // bank asymmetric under mirroring.
    let lowpass: Vec<f64> = radius
        .iter()
        .map(|&r| 1.0 / (1.0 + (r / 0.45).powi(30)))
        .collect();
    let mut nyquist = vec![false; n];
    if w % 2 == 0 {
        for j in 0..h {
            nyquist[j * w + w / 2] = true;
        }
    }
    if h % 2 == 0 {
        for i in 0..w {
            nyquist[(h / 2) * w + i] = true;
        }
    }
    let log_sigma = SIGMA_ONF.ln();
    let mut log_gabor = Vec::with_capacity(NSCALE);
    for s in 0..NSCALE {
        let wavelength = MIN_WAVELENGTH * MULT.powi(s as i32);
        let f0 = 1.0 / wavelength;
        let mut band: Vec<f64> = radius
            .iter()
            .zip(lowpass.iter())
            .zip(nyquist.iter())
            .map(|((&r, &lp), &nyq)| {
                if nyq {
                    return 0.0;
                }
                let num = (r / f0).ln();
                (-(num * num) / (2.0 * log_sigma * log_sigma)).exp() * lp
            })
            .collect();
        band[0] = 0.0;
        log_gabor.push(band);
    }

    let mut spectrum: Vec<Complex64> = img
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft2(&mut spectrum, w, h);

    let mut pc_sum = vec![0.0f64; n];
    let mut covx2 = vec![0.0f64; n];
    let mut covy2 = vec![0.0f64; n];
    let mut covxy = vec![0.0f64; n];
    let mut eo: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); n]; NSCALE];

    for o in 0..NORIENT {
        let angle = o as f64 * std::f64::consts::PI / NORIENT as f64;
        let (sin_a, cos_a) = angle.sin_cos();

        let mut sum_e = vec![0.0f64; n];
        let mut sum_o = vec![0.0f64; n];
        let mut sum_an = vec![0.0f64; n];
        let mut max_an = vec![0.0f64; n];
        let mut tau = 0.0f64;

        for s in 0..NSCALE {
            let band = &log_gabor[s];
            let buf = &mut eo[s];
            for i in 0..n {
                // Angular spread: cosine falloff with the angular distance
                // scaled so adjacent orientations overlap smoothly.
                let ds = sin_theta[i] * cos_a - cos_theta[i] * sin_a;
                let dc = cos_theta[i] * cos_a + sin_theta[i] * sin_a;
                let dtheta = (ds.atan2(dc).abs() * NORIENT as f64 / 2.0).min(std::f64::consts::PI);
                let spread = (dtheta.cos() + 1.0) / 2.0;
                buf[i] = spectrum[i] * (band[i] * spread);
            }
            ifft2(buf, w, h);
            for i in 0..n {
                let an = buf[i].norm();
                sum_an[i] += an;
                sum_e[i] += buf[i].re;
                sum_o[i] += buf[i].im;
                if s == 0 {
                    max_an[i] = an;
                } else {
                    max_an[i] = max_an[i].max(an);
                }
            }
            if s == 0 {
                // Rayleigh-derived noise scale from the smallest-scale
                // amplitude median.
                let amplitudes: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
                tau = median(&amplitudes) / 4.0f64.ln().sqrt();
            }
        }

        // Noise energy estimate from the smallest-scale response.
        let total_tau = tau * (1.0 - (1.0 / MULT).powi(NSCALE as i32)) / (1.0 - 1.0 / MULT);
        let noise_mean = total_tau * (std::f64::consts::PI / 2.0).sqrt();
        let noise_sigma = total_tau * ((4.0 - std::f64::consts::PI) / 2.0).sqrt();
        let threshold = noise_mean + NOISE_K * noise_sigma;

        for i in 0..n {
            let x_energy = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt() + EPSILON;
            let mean_e = sum_e[i] / x_energy;
            let mean_o = sum_o[i] / x_energy;
            let mut energy = 0.0;
            for band in eo.iter() {
                let (re, im) = (band[i].re, band[i].im);
                energy += re * mean_e + im * mean_o - (re * mean_o - im * mean_e).abs();
            }
            energy = (energy - threshold).max(0.0);
            // Frequency-spread weighting penalizes responses concentrated in
            // a single scale.
            let width = (sum_an[i] / (max_an[i] + EPSILON) - 1.0) / (NSCALE as f64 - 1.0);
            let weight = 1.0 / (1.0 + (SHARPNESS_G * (CUTOFF - width)).exp());
            let pc = weight * energy / (sum_an[i] + EPSILON);
            pc_sum[i] += pc;
            let cx = pc * cos_a;
            let cy = pc * sin_a;
            covx2[i] += cx * cx;
            covy2[i] += cy * cy;
            covxy[i] += cx * cy;
        }
    }

    let half_orient = NORIENT as f64 / 2.0;
    let mut moment_max = vec![0.0f64; n];
    let mut moment_min = vec![0.0f64; n];
    for i in 0..n {
        let x2 = covx2[i] / half_orient;
        let y2 = covy2[i] / half_orient;
        let xy = covxy[i] * 4.0 / NORIENT as f64;
        let denom = (xy * xy + (x2 - y2) * (x2 - y2)).sqrt() + EPSILON;
        moment_max[i] = (y2 + x2 + denom) / 2.0;
        moment_min[i] = (y2 + x2 - denom) / 2.0;
    }

    PhaseFeatures {
        congruency: pc_sum,
        moment_max,
        moment_min,
    }
}

/// Stabilized correlation coefficient between two feature maps.
fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let scale = 1.0 / (n - 1.0);
    ((sxy * scale) + CORR_C) / ((sxx * scale).sqrt() * (syy * scale).sqrt() + CORR_C)
}

/// Product of the best source-to-fused correlations of the phase congruency
/// map and its two principal moments.
pub fn q_p(a: &GrayImage, b: &GrayImage, f: &GrayImage) -> Result<f64> {
    ensure_same_size(a.size(), f.size())?;
    ensure_same_size(b.size(), f.size())?;
    let (w, h) = a.size();
    if w < MIN_SIZE || h < MIN_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: MIN_SIZE,
            min_height: MIN_SIZE,
        });
    }
    let joint_max = GrayImage::from_samples(
        w,
        h,
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(&x, &y)| x.max(y))
            .collect(),
    )?;
    let fa = phase_congruency(a);
    let fb = phase_congruency(b);
    let fs = phase_congruency(&joint_max);
    let ff = phase_congruency(f);

    let best = |get: fn(&PhaseFeatures) -> &Vec<f64>| {
        correlation(get(&fa), get(&ff))
            .max(correlation(get(&fb), get(&ff)))
            .max(correlation(get(&fs), get(&ff)))
    };
    let p_p = best(|f| &f.congruency);
    let p_max = best(|f| &f.moment_max);
    let p_min = best(|f| &f.moment_min);
    Ok(p_p * p_max * p_min)
}
