//! Depth map preprocessing: registration of the raw depth map onto the color
//! camera's image plane, dilation of the sampling gaps the warp leaves
//! behind, and a single-pass diffusion fill for the remaining sensor holes.

use serde::{Deserialize, Serialize};

use crate::calib::{Calibration, CameraIntrinsics, Extrinsics};
use crate::raster::{DepthMap, INVALID_DEPTH};
use crate::{Error, Result};

/// Diffusion parameters for the hole-filling pass. `lambda` must stay within
/// `[0, 0.25]` for the update to be stable; `k_mm` is the conduction standard
/// deviation in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdParams {
    pub lambda: f64,
    pub k_mm: f64,
}

impl Default for AdParams {
    fn default() -> Self {
        Self {
            lambda: 0.25,
            k_mm: 30.0,
        }
    }
}

impl AdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && (0.0..=0.25).contains(&self.lambda)) {
            return Err(Error::InvalidParameter(format!(
                "diffusion rate lambda must lie in [0, 0.25] (got {})",
                self.lambda
            )));
        }
        if !(self.k_mm.is_finite() && self.k_mm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "conduction deviation k_mm must be positive (got {})",
                self.k_mm
            )));
        }
        Ok(())
    }
}

/// Pixels discarded while splatting the warped depth map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignReport {
    /// Transformed depth came out zero or negative.
    pub dropped_nonpositive: usize,
    /// Projection landed outside the output image.
    pub dropped_out_of_bounds: usize,
}

/// Registers `raw` onto the color camera's image plane.
///
/// Every valid sample is back-projected through the depth camera's pinhole
/// model, moved into the color camera frame, and re-projected; the target
/// pixel (nearest integer) receives the transformed depth. When several
/// sources land on one target the smallest depth wins, since the front
/// surface occludes. Untouched output pixels stay invalid.
pub fn align_depth(
    raw: &DepthMap,
    ir: &CameraIntrinsics,
    color: &CameraIntrinsics,
    ext: &Extrinsics,
    out_size: (usize, usize),
) -> Result<(DepthMap, AlignReport)> {
    ir.validate()?;
    color.validate()?;
    ext.validate()?;
    let (out_w, out_h) = out_size;
    let mut best = vec![
        f64::INFINITY;
        out_w.checked_mul(out_h).ok_or(Error::DimensionOverflow {
            width: out_w,
            height: out_h,
        },)?
    ];
    let mut out = DepthMap::new(out_w, out_h)?;
    let mut report = AlignReport::default();

    for y in 0..raw.height() {
        for x in 0..raw.width() {
            let z = raw.get(x, y);
            if z == INVALID_DEPTH {
                continue;
            }
            let z = z as f64;
            let px = (x as f64 - ir.u0) * z / ir.fx;
            let py = (y as f64 - ir.v0) * z / ir.fy;
            let [tx, ty, tz] = ext.transform([px, py, z]);
            if tz <= 0.0 {
                report.dropped_nonpositive += 1;
                continue;
            }
            let u = (tx / tz * color.fx + color.u0).round();
            let v = (ty / tz * color.fy + color.v0).round();
            if u < 0.0 || v < 0.0 || u >= out_w as f64 || v >= out_h as f64 {
                report.dropped_out_of_bounds += 1;
                continue;
            }
            let depth_mm = tz.round();
            if depth_mm < 1.0 {
                report.dropped_nonpositive += 1;
                continue;
            }
            let idx = v as usize * out_w + u as usize;
            if tz < best[idx] {
                best[idx] = tz;
                out.set(u as usize, v as usize, depth_mm.min(65535.0) as u16);
            }
        }
    }
    Ok((out, report))
}

/// 3x3 max-dilation written only into invalid pixels; valid samples pass
/// through untouched. Unrestricted dilation would eat into valid depth
/// boundaries, and the point of the operation is recovering the pixels the
/// warp left empty.
pub fn dilate_fill(aligned: &DepthMap) -> DepthMap {
    let (w, h) = aligned.size();
    let mut out = aligned.clone();
    for y in 0..h {
        for x in 0..w {
            if aligned.get(x, y) != INVALID_DEPTH {
                continue;
            }
            let mut m = 0u16;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                        m = m.max(aligned.get(nx as usize, ny as usize));
                    }
                }
            }
            out.set(x, y, m);
        }
    }
    out
}

fn conduction(diff: f64, k_mm: f64) -> f64 {
    let r = diff / k_mm;
    (-(r * r)).exp()
}

/// Single-pass diffusion fill.
///
/// Hole pixels are visited in raster order. Because the sensor geometry puts
/// holes on the left side of objects, the value is rebuilt around the
/// reference pixel two columns to the left: the four differences are taken
/// between the reference and its own left/right/up/down neighbors, each
/// weighted by a Gaussian conduction coefficient, and already-filled values
/// participate. Neighbors that are invalid or outside the image contribute
/// nothing. A hole whose reference is itself invalid falls back, after the
/// pass, to the nearest valid pixel leftwards in its row, then rightwards,
/// then the nearest in its column, then the first valid pixel in raster
/// order, so the output never contains holes.
pub fn ad_hole_fill(d: &DepthMap, params: &AdParams) -> Result<DepthMap> {
    params.validate()?;
    if d.valid_count() == 0 {
        return Err(Error::AllInvalid);
    }
    let (w, h) = d.size();
    let mut out = d.clone();

    for y in 0..h {
        for x in 0..w {
            if out.get(x, y) != INVALID_DEPTH || x < 2 {
                continue;
            }
            let refv = out.get(x - 2, y);
            if refv == INVALID_DEPTH {
                continue;
            }
            let refv = refv as f64;
            let rx = x as isize - 2;
            let ry = y as isize;
            let mut acc = 0.0;
            for (nx, ny) in [(rx - 1, ry), (rx + 1, ry), (rx, ry - 1), (rx, ry + 1)] {
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let n = out.get(nx as usize, ny as usize);
                if n == INVALID_DEPTH {
                    continue;
                }
                let diff = n as f64 - refv;
                acc += conduction(diff, params.k_mm) * diff;
            }
            let v = (refv + params.lambda * acc).round().clamp(1.0, 65535.0);
            out.set(x, y, v as u16);
        }
    }

    // Fallback chain for holes the diffusion pass could not resolve.
    for y in 0..h {
        for x in 0..w {
            if out.get(x, y) != INVALID_DEPTH {
                continue;
            }
            let v = (0..x)
                .rev()
                .map(|xx| out.get(xx, y))
                .find(|&v| v != INVALID_DEPTH)
                .or_else(|| {
                    (x + 1..w)
                        .map(|xx| out.get(xx, y))
                        .find(|&v| v != INVALID_DEPTH)
                })
                .or_else(|| {
                    (1..h).find_map(|dy| {
                        let up = y.checked_sub(dy).map(|yy| out.get(x, yy));
                        if let Some(v) = up.filter(|&v| v != INVALID_DEPTH) {
                            return Some(v);
                        }
                        (y + dy < h)
                            .then(|| out.get(x, y + dy))
                            .filter(|&v| v != INVALID_DEPTH)
                    })
                })
                .or_else(|| out.samples().iter().copied().find(|&v| v != INVALID_DEPTH));
            // The map held at least one valid pixel, so the chain cannot
            // come up empty.
            out.set(x, y, v.expect("at least one valid pixel"));
        }
    }
    Ok(out)
}

/// Full preprocessing chain: registration, dilation, hole fill. The result
/// has the requested output size and no invalid pixels.
pub fn preprocess(
    raw: &DepthMap,
    calib: &Calibration,
    params: &AdParams,
    out_size: (usize, usize),
) -> Result<DepthMap> {
    let (aligned, _report) = align_depth(
        raw,
        &calib.ir_intrinsics,
        &calib.color_intrinsics,
        &calib.extrinsics,
        out_size,
    )?;
    ad_hole_fill(&dilate_fill(&aligned), params)
}
