//! Fusion quality metrics.
//!
//! Six standard full-reference metrics covering the four usual families:
//! information theory ([`q_mi`], [`q_ncie`]), image features ([`q_g`],
//! [`q_p`]), structural similarity ([`q_y`]), and human perception
//! ([`q_cb`]). For all of them a larger value means a better fusion.
//! [`rank`] turns per-scene metric values for several methods into the
//! score-and-ranking summary.

mod contrast;
mod gradient;
mod info;
mod phase;
pub mod rank;
mod ssim;

use serde::{Deserialize, Serialize};

pub use contrast::{q_cb, CsfFilter, QcbParams};
pub use gradient::{q_g, QgParams};
pub use info::{q_mi, q_ncie};
pub use phase::q_p;
pub use rank::{parse_rank_csv, rank_methods, RankInput, RankRow, ScoreTable};
pub use ssim::q_y;

use crate::raster::{rgb_to_gray, ColorImage};
use crate::{ensure_same_size, Error, Result};

/// Tunables for the parameterized metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricParams {
    #[serde(default)]
    pub qg: QgParams,
    #[serde(default)]
    pub qcb: QcbParams,
}

/// The six metric values for one `(A, B, F)` triple. A metric that failed
/// on degenerate input reports NaN here and an entry in the failure list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub q_mi: f64,
    pub q_ncie: f64,
    pub q_g: f64,
    pub q_p: f64,
    pub q_y: f64,
    pub q_cb: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "q_mi,q_ncie,q_g,q_p,q_y,q_cb";

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.q_mi,
            self.q_ncie,
            self.q_g,
            self.q_p,
            self.q_y,
            self.q_cb
        )
    }

    pub fn values(&self) -> [(&'static str, f64); 6] {
        [
            ("q_mi", self.q_mi),
            ("q_ncie", self.q_ncie),
            ("q_g", self.q_g),
            ("q_p", self.q_p),
            ("q_y", self.q_y),
            ("q_cb", self.q_cb),
        ]
    }

    pub fn to_markdown(&self) -> String {
        let header: Vec<String> = self.values().iter().map(|(n, _)| n.to_string()).collect();
        let row: Vec<String> = self
            .values()
            .iter()
            .map(|(_, v)| format!("{v:.4}"))
            .collect();
        rank::render_markdown(&header, &[row])
    }
}

/// A metric that could not be computed, with the reason.
#[derive(Debug)]
pub struct MetricFailure {
    pub metric: &'static str,
    pub error: Error,
}

/// Converts to intensity and runs all six metrics. Individual metric
/// failures (degenerate inputs, undersized images) are recorded rather than
/// fatal; the corresponding report slot holds NaN.
pub fn evaluate_all(
    a: &ColorImage,
    b: &ColorImage,
    f: &ColorImage,
    params: &MetricParams,
) -> Result<(MetricReport, Vec<MetricFailure>)> {
    ensure_same_size(a.size(), f.size())?;
    ensure_same_size(b.size(), f.size())?;
    let ga = rgb_to_gray(a);
    let gb = rgb_to_gray(b);
    let gf = rgb_to_gray(f);

    // The six kernels are pure and independent; run them concurrently over
    // the shared rasters.
    use rayon::prelude::*;
    const NAMES: [&str; 6] = ["q_mi", "q_ncie", "q_g", "q_p", "q_y", "q_cb"];
    let outcomes: Vec<Result<f64>> = (0..6usize)
        .into_par_iter()
        .map(|i| match i {
            0 => q_mi(&ga, &gb, &gf),
            1 => q_ncie(&ga, &gb, &gf),
            2 => q_g(&ga, &gb, &gf, &params.qg),
            3 => q_p(&ga, &gb, &gf),
            4 => q_y(&ga, &gb, &gf),
            _ => q_cb(&ga, &gb, &gf, &params.qcb),
        })
        .collect();

    let mut values = [f64::NAN; 6];
    let mut failures = Vec::new();
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(v) => values[idx] = v,
            Err(error) => failures.push(MetricFailure {
                metric: NAMES[idx],
                error,
            }),
        }
    }
    Ok((
        MetricReport {
            q_mi: values[0],
            q_ncie: values[1],
            q_g: values[2],
            q_p: values[3],
            q_y: values[4],
            q_cb: values[5],
        },
        failures,
    ))
}
