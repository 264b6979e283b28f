//! Depth-of-field arithmetic.
//!
//! For a lens focused at distance `u`, the scene depth band that images
//! acceptably sharply splits into a back part (beyond `u`) and a front part
//! (before `u`):
//!
//! ```text
//! b_dof(u) = F*d*u^2 / (f^2 - F*d*u)
//! f_dof(u) = F*d*u^2 / (f^2 + F*d*u)
//! ```
//!
//! with focal length `f`, aperture value `F`, and acceptable circle of
//! confusion diameter `d`, all in millimeters. The back term diverges at the
//! hyperfocal distance `f^2/(F*d)`; beyond it everything to infinity is
//! acceptably sharp.

use crate::calib::OpticsConfig;
use crate::{Error, Result};

/// Distance past which the back depth of field becomes unbounded.
pub fn hyperfocal_distance(optics: &OpticsConfig) -> f64 {
    optics.f_mm * optics.f_mm / (optics.f_number * optics.coc_mm)
}

/// Back depth of field at focus distance `u_mm`.
pub fn back_dof(u_mm: f64, optics: &OpticsConfig) -> Result<f64> {
    if !(u_mm.is_finite() && u_mm > 0.0) {
        return Err(Error::NonPositiveDepth(u_mm));
    }
    let fd = optics.f_number * optics.coc_mm;
    let denom = optics.f_mm * optics.f_mm - fd * u_mm;
    if denom <= 0.0 {
        return Err(Error::HyperfocalExceeded {
            u_mm,
            hyperfocal_mm: hyperfocal_distance(optics),
        });
    }
    Ok(fd * u_mm * u_mm / denom)
}

/// Front depth of field at focus distance `u_mm`. Defined for all positive
/// depths; the denominator never vanishes.
pub fn front_dof(u_mm: f64, optics: &OpticsConfig) -> Result<f64> {
    if !(u_mm.is_finite() && u_mm > 0.0) {
        return Err(Error::NonPositiveDepth(u_mm));
    }
    let fd = optics.f_number * optics.coc_mm;
    Ok(fd * u_mm * u_mm / (optics.f_mm * optics.f_mm + fd * u_mm))
}

/// The larger of `b_dof(min)` and `f_dof(max)` for a depth span, or `None`
/// when `min` lies beyond the hyperfocal distance (unbounded back DoF).
pub fn max_dof(min_mm: f64, max_mm: f64, optics: &OpticsConfig) -> Result<Option<f64>> {
    if min_mm > max_mm {
        return Err(Error::InvertedDepthRange { min_mm, max_mm });
    }
    let front = front_dof(max_mm, optics)?;
    match back_dof(min_mm, optics) {
        Ok(back) => Ok(Some(back.max(front))),
        Err(Error::HyperfocalExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// A depth span `[min, max]` can appear in focus under one setting iff its
/// extent is smaller than the larger of `b_dof(min)` and `f_dof(max)`.
/// Beyond the hyperfocal distance the rule passes unconditionally.
pub fn dof_rule(min_mm: f64, max_mm: f64, optics: &OpticsConfig) -> Result<bool> {
    Ok(match max_dof(min_mm, max_mm, optics)? {
        Some(limit) => max_mm - min_mm < limit,
        None => true,
    })
}

/// Exact thin-lens blur circle diameter (mm on the sensor) for a point at
/// `u_mm` when the lens focuses at `u_f_mm`. Both distances must exceed the
/// focal length. Used by the defocus simulator; the pipeline itself works
/// with the `b_dof`/`f_dof` forms above.
pub fn coc_diameter(u_mm: f64, u_f_mm: f64, optics: &OpticsConfig) -> Result<f64> {
    for d in [u_mm, u_f_mm] {
        if !(d.is_finite() && d > optics.f_mm) {
            return Err(Error::DepthWithinFocalLength {
                depth_mm: d,
                focal_mm: optics.f_mm,
            });
        }
    }
    let f = optics.f_mm;
    Ok((f * f / optics.f_number) * (u_mm - u_f_mm).abs() / (u_mm * (u_f_mm - f)))
}
