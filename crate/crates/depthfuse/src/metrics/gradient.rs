//! Gradient-preservation fusion metric: how much of each source's edge
//! strength and orientation survives into the fused image, judged through a
//! pair of sigmoids and weighted by source edge strength.

use serde::{Deserialize, Serialize};

use crate::filter;
use crate::raster::GrayImage;
use crate::{ensure_same_size, Error, Result};

/// Sigmoid shape constants. Defaults are the values commonly used with this
/// metric; all are configurable. `orientation_on_strength` keeps the literal
/// published reading in which the orientation sigmoid is evaluated on the
/// relative strength instead of the relative orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QgParams {
    pub gamma_g: f64,
    pub k_g: f64,
    pub sigma_g: f64,
    pub gamma_a: f64,
    pub k_a: f64,
    pub sigma_a: f64,
    pub weight_exponent: f64,
    #[serde(default)]
    pub orientation_on_strength: bool,
}

impl Default for QgParams {
    fn default() -> Self {
        Self {
            gamma_g: 0.9994,
            k_g: -15.0,
            sigma_g: 0.5,
            gamma_a: 0.9879,
            k_a: -22.0,
            sigma_a: 0.8,
            weight_exponent: 1.0,
            orientation_on_strength: false,
        }
    }
}

impl QgParams {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma_g", self.gamma_g), ("gamma_a", self.gamma_a)] {
            if !(g.is_finite() && g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1] (got {g})"
                )));
            }
        }
        Ok(())
    }

    /// The per-pixel preservation value at perfect strength and orientation
    /// agreement; also the whole-image value when both comparisons are
    /// perfect everywhere.
    pub fn perfect_preservation(&self) -> f64 {
        self.strength_sigmoid(1.0) * self.orientation_sigmoid(1.0)
    }

    fn strength_sigmoid(&self, g: f64) -> f64 {
        self.gamma_g / (1.0 + (self.k_g * (g - self.sigma_g)).exp())
    }

    fn orientation_sigmoid(&self, d: f64) -> f64 {
        self.gamma_a / (1.0 + (self.k_a * (d - self.sigma_a)).exp())
    }
}

struct EdgeField {
    strength: Vec<f64>,
    orientation: Vec<f64>,
}

fn edge_field(img: &GrayImage) -> EdgeField {
    let (sx, sy) = filter::sobel(img);
    let strength = sx
        .samples()
        .iter()
        .zip(sy.samples())
        .map(|(&x, &y)| (x * x + y * y).sqrt())
        .collect();
    let orientation = sx
        .samples()
        .iter()
        .zip(sy.samples())
        .map(|(&x, &y)| {
            if y != 0.0 {
                (x / y).atan()
            } else if x != 0.0 {
                std::f64::consts::FRAC_PI_2.copysign(x)
            } else {
                0.0
            }
        })
        .collect();
    EdgeField {
        strength,
        orientation,
    }
}

/// Per-pixel edge-information preservation of `src` in `fused`.
fn preservation(src: &EdgeField, fused: &EdgeField, p: &QgParams, out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate() {
        let ga = src.strength[i];
        let gf = fused.strength[i];
        if ga == 0.0 && gf == 0.0 {
            // Nothing to preserve and nothing invented: perfect agreement.
            *slot = p.perfect_preservation();
            continue;
        }
        let g_rel = if ga > gf {
            gf / ga
        } else if gf > 0.0 {
            ga / gf
        } else {
            0.0
        };
        let d_rel =
            1.0 - (src.orientation[i] - fused.orientation[i]).abs() / std::f64::consts::FRAC_PI_2;
        let d_arg = if p.orientation_on_strength {
            g_rel
        } else {
            d_rel
        };
        *slot = p.strength_sigmoid(g_rel) * p.orientation_sigmoid(d_arg);
    }
}

/// Weighted average of edge-information preservation over both sources.
/// Weights are source edge strengths raised to `weight_exponent`; inputs
/// whose gradients vanish everywhere leave the average undefined.
pub fn q_g(a: &GrayImage, b: &GrayImage, f: &GrayImage, params: &QgParams) -> Result<f64> {
    params.validate()?;
    ensure_same_size(a.size(), f.size())?;
    ensure_same_size(b.size(), f.size())?;
    let ea = edge_field(a);
    let eb = edge_field(b);
    let ef = edge_field(f);
    let n = ea.strength.len();
    let mut qa = vec![0.0; n];
    let mut qb = vec![0.0; n];
    preservation(&ea, &ef, params, &mut qa);
    preservation(&eb, &ef, params, &mut qb);

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let wa = ea.strength[i].powf(params.weight_exponent);
        let wb = eb.strength[i].powf(params.weight_exponent);
        num += qa[i] * wa + qb[i] * wb;
        den += wa + wb;
    }
    if den == 0.0 {
        return Err(Error::DegenerateInput(
            "both source images are constant; gradient weights vanish",
        ));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(vals: &[f64], w: usize, h: usize) -> GrayImage {
        GrayImage::from_samples(w, h, vals.to_vec()).unwrap()
    }

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
    fn identity_equals_sigmoid_product() {
        let x = noise(24, 24, 3);
        let v = q_g(&x, &x, &x, &QgParams::default()).unwrap();
        let expected = QgParams::default().perfect_preservation();
        assert!((v - expected).abs() < 1e-9, "got {v}, expected {expected}");
        assert!((expected - 0.9747936249694977).abs() < 1e-12);
    }

    #[test]
    fn blur_lowers_the_score() {
        let x = noise(32, 32, 8);
        let blurred = crate::filter::gaussian_blur(&x, 2.0);
        let sharp = q_g(&x, &x, &x, &QgParams::default()).unwrap();
        let soft = q_g(&x, &x, &blurred, &QgParams::default()).unwrap();
        assert!(soft < sharp, "soft {soft} vs sharp {sharp}");
    }

    #[test]
    fn vertical_edge_matches_scalar_oracle() {
        // Frozen from a direct scalar evaluation of the Sobel fields,
        // relative strength/orientation, sigmoids, and the weighted average
        // on these 3x3 inputs.
        let a = gray(&[0.0, 0.0, 255.0, 0.0, 0.0, 255.0, 0.0, 0.0, 255.0], 3, 3);
        let b = gray(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 255.0, 255.0, 255.0], 3, 3);
        let f = a.clone();
        let v = q_g(&a, &b, &f, &QgParams::default()).unwrap();
        assert!((v - 0.48748667714432214).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn constant_inputs_are_degenerate() {
        let c = gray(&[9.0; 16], 4, 4);
        assert!(matches!(
            q_g(&c, &c, &c, &QgParams::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn literal_reading_flag_changes_the_value() {
        let a = noise(16, 16, 5);
        let f = crate::filter::gaussian_blur(&a, 1.0);
        let standard = q_g(&a, &a, &f, &QgParams::default()).unwrap();
        let literal = q_g(
            &a,
            &a,
            &f,
            &QgParams {
                orientation_on_strength: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(standard != literal);
    }

    #[test]
    fn gamma_outside_unit_interval_rejected() {
        let x = noise(8, 8, 2);
        let p = QgParams {
            gamma_g: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            q_g(&x, &x, &x, &p),
            Err(Error::InvalidParameter(_))
        ));
    }
}
