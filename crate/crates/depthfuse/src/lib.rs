//! Depth-assisted all-in-focus imaging toolkit.
//!
//! The pipeline takes a raw depth map and a stack of multi-focus source
//! images, aligns and repairs the depth map, segments it into regions whose
//! depth span fits inside one depth of field, picks the sharpest source per
//! region, and composites the all-in-focus result. A thin-lens defocus
//! simulator generates verifiable synthetic inputs, and six standard fusion
//! quality metrics score the output.

pub mod calib;
pub mod depthprep;
pub mod dof;
pub mod fft;
pub mod filter;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod segment;
pub mod simulate;

use std::path::Path;

pub use calib::{Calibration, CameraIntrinsics, Extrinsics, OpticsConfig, SensorRange};
pub use raster::{ColorImage, DepthMap, GrayImage};

/// Errors produced by any stage of the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("image dimensions must be positive (got {width}x{height})")]
    InvalidDimensions { width: usize, height: usize },
    #[error("raster of {width}x{height} overflows addressable size")]
    DimensionOverflow { width: usize, height: usize },
    #[error("sample buffer holds {got} values, expected {expected}")]
    SampleCountMismatch { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("malformed {format} header: {reason}")]
    MalformedHeader {
        format: &'static str,
        reason: String,
    },
    #[error("truncated payload: expected {expected} bytes, found {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("unsupported raster format: {0}")]
    UnsupportedFormat(String),
    #[error("rotation matrix is not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormalRotation { deviation: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("depth {u_mm} mm is at or beyond the hyperfocal distance {hyperfocal_mm:.1} mm")]
    HyperfocalExceeded { u_mm: f64, hyperfocal_mm: f64 },
    #[error("depth must be positive (got {0} mm)")]
    NonPositiveDepth(f64),
    #[error("depth must exceed the focal length (got {depth_mm} mm, focal {focal_mm} mm)")]
    DepthWithinFocalLength { depth_mm: f64, focal_mm: f64 },
    #[error("depth range inverted: min {min_mm} mm > max {max_mm} mm")]
    InvertedDepthRange { min_mm: f64, max_mm: f64 },
    #[error("depth map contains {0} invalid pixels")]
    HolesPresent(usize),
    #[error("depth map has no valid pixels")]
    AllInvalid,
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("image stack needs at least two sources (got {0})")]
    StackTooSmall(usize),
    #[error("image stack holds more sources than an 8-bit label can address ({0})")]
    StackTooLarge(usize),
    #[error("operation requires a two-source stack (got {0} sources)")]
    NotTwoSources(usize),
    #[error("source index {index} out of range for {sources} sources")]
    SourceIndexOutOfRange { index: usize, sources: usize },
    #[error("image {width}x{height} too small, need at least {min_width}x{min_height}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("{0} regions exceed the 16-bit label budget")]
    TooManyRegions(usize),
    #[error("ranking needs at least two methods (got {0})")]
    TooFewMethods(usize),
    #[error("non-finite value in ranking input: scene {scene}, metric {metric}, method {method}")]
    NonFiniteRankValue {
        scene: String,
        metric: String,
        method: String,
    },
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("scene spec invalid: {0}")]
    InvalidScene(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json ({context}): {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            context: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_same_size((lw, lh): (usize, usize), (rw, rh): (usize, usize)) -> Result<()> {
    if (lw, lh) != (rw, rh) {
        return Err(Error::DimensionMismatch {
            left_width: lw,
            left_height: lh,
            right_width: rw,
            right_height: rh,
        });
    }
    Ok(())
}
