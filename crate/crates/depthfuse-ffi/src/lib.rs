//! C ABI for the depthfuse pipeline.
//!
//! All handles are opaque; every constructor has a matching `_free`, and
//! every fallible call returns a [`DfStatus`]. On failure a thread-local
//! message is available through [`df_last_error_message`] until the next
//! failing call on the same thread. Passing a pointer that did not come
//! from this library, or using a handle after freeing it, is undefined
//! behavior throughout.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::PathBuf;

use libc::{c_char, size_t};

use depthfuse::depthprep::AdParams;
use depthfuse::fusion::{ImageStack, LabelMap};
use depthfuse::metrics::{self, MetricParams};
use depthfuse::pipeline::{self, PipelineParams};
use depthfuse::segment::{SegParams, SegmentationMap};
use depthfuse::{dof, io, Calibration, ColorImage, DepthMap, OpticsConfig};

/// Call outcome. Anything but `DF_STATUS_OK` leaves a description in
/// `df_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    IoError = 3,
    FormatError = 4,
    NumericError = 5,
    InternalError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn remember(msg: String, status: DfStatus) -> DfStatus {
    let cstring = CString::new(msg.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
    status
}

fn classify(err: &depthfuse::Error) -> DfStatus {
    use depthfuse::Error::*;
    match err {
        Io { .. } => DfStatus::IoError,
        MalformedHeader { .. }
        | TruncatedPayload { .. }
        | UnsupportedFormat(_)
        | Json { .. }
        | MalformedTable(_) => DfStatus::FormatError,
        HyperfocalExceeded { .. }
        | NonPositiveDepth(_)
        | DepthWithinFocalLength { .. }
        | InvertedDepthRange { .. }
        | DegenerateInput(_) => DfStatus::NumericError,
        _ => DfStatus::InvalidArgument,
    }
}

fn fail(err: depthfuse::Error) -> DfStatus {
    let status = classify(&err);
    remember(err.to_string(), status)
}

fn null_arg(name: &str) -> DfStatus {
    remember(format!("{name} must not be null"), DfStatus::NullArgument)
}

/// Reads a UTF-8 path argument.
///
/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn path_arg(ptr: *const c_char, name: &str) -> Result<PathBuf, DfStatus> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(remember(
            format!("{name} is not valid UTF-8"),
            DfStatus::InvalidArgument,
        )),
    }
}

unsafe fn write_out<T>(out: *mut *mut T, value: T, name: &str) -> DfStatus {
    if out.is_null() {
        return null_arg(name);
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    DfStatus::Ok
}

macro_rules! require {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return null_arg($name),
        }
    };
}

/// Opaque per-pixel depth map (millimeters, 0 marks a hole).
pub struct DfDepthMap(DepthMap);
/// Opaque 8-bit RGB image.
pub struct DfColorImage(ColorImage);
/// Opaque ordered multi-focus source collection under construction.
#[derive(Default)]
pub struct DfImageStack(Vec<ColorImage>);
/// Opaque region labeling of a depth map.
pub struct DfSegmentation(SegmentationMap);
/// Opaque per-pixel chosen-source indices.
pub struct DfLabelMap(LabelMap);
/// Opaque calibration bundle.
pub struct DfCalibration(Calibration);

/// The six fusion-quality metric values; a slot is NaN when that metric was
/// not computable on the inputs.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DfMetricReport {
    pub q_mi: f64,
    pub q_ncie: f64,
    pub q_g: f64,
    pub q_p: f64,
    pub q_y: f64,
    pub q_cb: f64,
}

/// Per-stage pipeline wall time in milliseconds.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DfTimings {
    pub preprocess_ms: f64,
    pub segment_ms: f64,
    pub select_ms: f64,
    pub total_ms: f64,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn df_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

// ---------------------------------------------------------------------------
// Depth maps
// ---------------------------------------------------------------------------

/// Loads a 16-bit PGM depth map.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid location.
#[no_mangle]
pub unsafe extern "C" fn df_depth_map_read_pgm(
    path: *const c_char,
    out: *mut *mut DfDepthMap,
) -> DfStatus {
    let path = match unsafe { path_arg(path, "path") } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::read_depth_pgm(&path) {
        Ok(map) => unsafe { write_out(out, DfDepthMap(map), "out") },
        Err(e) => fail(e),
    }
}

/// Writes a depth map as 16-bit PGM.
///
/// # Safety
/// `map` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn df_depth_map_write_pgm(
    map: *const DfDepthMap,
    path: *const c_char,
) -> DfStatus {
    let map = require!(map, "map");
    let path = match unsafe { path_arg(path, "path") } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::write_depth_pgm(&path, &map.0) {
        Ok(()) => DfStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Builds a depth map from a row-major buffer of `width * height` samples.
///
/// # Safety
/// `data` must point to at least `width * height` readable `uint16_t`s.
#[no_mangle]
pub unsafe extern "C" fn df_depth_map_create(
    width: size_t,
    height: size_t,
    data: *const u16,
    out: *mut *mut DfDepthMap,
) -> DfStatus {
    if data.is_null() {
        return null_arg("data");
    }
    let samples = unsafe { std::slice::from_raw_parts(data, width * height) }.to_vec();
    match DepthMap::from_samples(width, height, samples) {
        Ok(map) => unsafe { write_out(out, DfDepthMap(map), "out") },
        Err(e) => fail(e),
    }
}

/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_depth_map_width(map: *const DfDepthMap) -> size_t {
    unsafe { map.as_ref() }.map_or(0, |m| m.0.width())
}

/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_depth_map_height(map: *const DfDepthMap) -> size_t {
    unsafe { map.as_ref() }.map_or(0, |m| m.0.height())
}

/// Copies all samples into `buffer` (`len` must be `width * height`).
///
/// # Safety
/// `buffer` must point to `len` writable `uint16_t`s.
#[no_mangle]
pub unsafe extern "C" fn df_depth_map_copy_data(
    map: *const DfDepthMap,
    buffer: *mut u16,
    len: size_t,
) -> DfStatus {
    let map = require!(map, "map");
    if buffer.is_null() {
        return null_arg("buffer");
    }
    let samples = map.0.samples();
    if len != samples.len() {
        return remember(
            format!("buffer holds {len} samples, expected {}", samples.len()),
            DfStatus::InvalidArgument,
        );
    }
    unsafe { std::slice::from_raw_parts_mut(buffer, len) }.copy_from_slice(samples);
    DfStatus::Ok
}

/// # Safety
/// `map` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_depth_map_free(map: *mut DfDepthMap) {
    if !map.is_null() {
        drop(unsafe { Box::from_raw(map) });
    }
}

// ---------------------------------------------------------------------------
// Color images
// ---------------------------------------------------------------------------

/// Loads an 8-bit RGB PNG.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid location.
#[no_mangle]
pub unsafe extern "C" fn df_color_image_read_png(
    path: *const c_char,
    out: *mut *mut DfColorImage,
) -> DfStatus {
    let path = match unsafe { path_arg(path, "path") } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::read_color_png(&path) {
        Ok(img) => unsafe { write_out(out, DfColorImage(img), "out") },
        Err(e) => fail(e),
    }
}

/// # Safety
/// `img` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn df_color_image_write_png(
    img: *const DfColorImage,
    path: *const c_char,
) -> DfStatus {
    let img = require!(img, "img");
    let path = match unsafe { path_arg(path, "path") } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::write_color_png(&path, &img.0) {
        Ok(()) => DfStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Builds an image from interleaved row-major RGB bytes.
///
/// # Safety
/// `data` must point to `width * height * 3` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn df_color_image_create(
    width: size_t,
    height: size_t,
    data: *const u8,
    out: *mut *mut DfColorImage,
) -> DfStatus {
    if data.is_null() {
        return null_arg("data");
    }
    let samples = unsafe { std::slice::from_raw_parts(data, width * height * 3) }.to_vec();
    match ColorImage::from_samples(width, height, samples) {
        Ok(img) => unsafe { write_out(out, DfColorImage(img), "out") },
        Err(e) => fail(e),
    }
}

/// # Safety
/// `img` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_color_image_width(img: *const DfColorImage) -> size_t {
    unsafe { img.as_ref() }.map_or(0, |i| i.0.width())
}

/// # Safety
/// `img` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_color_image_height(img: *const DfColorImage) -> size_t {
    unsafe { img.as_ref() }.map_or(0, |i| i.0.height())
}

/// Copies interleaved RGB bytes into `buffer` (`len` = `width*height*3`).
///
/// # Safety
/// `buffer` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn df_color_image_copy_data(
    img: *const DfColorImage,
    buffer: *mut u8,
    len: size_t,
) -> DfStatus {
    let img = require!(img, "img");
    if buffer.is_null() {
        return null_arg("buffer");
    }
    let samples = img.0.samples();
    if len != samples.len() {
        return remember(
            format!("buffer holds {len} bytes, expected {}", samples.len()),
            DfStatus::InvalidArgument,
        );
    }
    unsafe { std::slice::from_raw_parts_mut(buffer, len) }.copy_from_slice(samples);
    DfStatus::Ok
}

/// # Safety
/// `img` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_color_image_free(img: *mut DfColorImage) {
    if !img.is_null() {
        drop(unsafe { Box::from_raw(img) });
    }
}

// ---------------------------------------------------------------------------
// Stacks, calibration
// ---------------------------------------------------------------------------

/// Creates an empty source stack; push at least two images before use.
#[no_mangle]
pub extern "C" fn df_image_stack_create() -> *mut DfImageStack {
    Box::into_raw(Box::new(DfImageStack::default()))
}

/// Appends a copy of `img` to the stack.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn df_image_stack_push(
    stack: *mut DfImageStack,
    img: *const DfColorImage,
) -> DfStatus {
    let img = require!(img, "img");
    match unsafe { stack.as_mut() } {
        Some(s) => {
            s.0.push(img.0.clone());
            DfStatus::Ok
        }
        None => null_arg("stack"),
    }
}

/// # Safety
/// `stack` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_image_stack_free(stack: *mut DfImageStack) {
    if !stack.is_null() {
        drop(unsafe { Box::from_raw(stack) });
    }
}

/// Loads a calibration JSON bundle.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid location.
#[no_mangle]
pub unsafe extern "C" fn df_calibration_read_json(
    path: *const c_char,
    out: *mut *mut DfCalibration,
) -> DfStatus {
    let path = match unsafe { path_arg(path, "path") } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match Calibration::from_json_file(&path) {
        Ok(calib) => unsafe { write_out(out, DfCalibration(calib), "out") },
        Err(e) => fail(e),
    }
}

/// # Safety
/// `calib` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_calibration_free(calib: *mut DfCalibration) {
    if !calib.is_null() {
        drop(unsafe { Box::from_raw(calib) });
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Runs preprocess, segmentation, selection, and composition. Any of the
/// output handles may be null when that artifact is not wanted; `timings`
/// may be null as well. Pass non-positive tunables to use the defaults
/// (lambda 0.25, k 30 mm, felz_k 100 mm, min_region_px 100).
///
/// # Safety
/// `depth`, `stack`, and `calib` must be live handles; output locations,
/// when non-null, must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_pipeline_run(
    depth: *const DfDepthMap,
    stack: *const DfImageStack,
    calib: *const DfCalibration,
    ad_lambda: f64,
    ad_k_mm: f64,
    felz_k: f64,
    min_region_px: size_t,
    fused_out: *mut *mut DfColorImage,
    labels_out: *mut *mut DfLabelMap,
    segmentation_out: *mut *mut DfSegmentation,
    timings: *mut DfTimings,
) -> DfStatus {
    let depth = require!(depth, "depth");
    let stack = require!(stack, "stack");
    let calib = require!(calib, "calib");
    let sources = match ImageStack::new(stack.0.clone()) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let defaults = PipelineParams::default();
    let params = PipelineParams {
        ad: AdParams {
            lambda: if ad_lambda > 0.0 {
                ad_lambda
            } else {
                defaults.ad.lambda
            },
            k_mm: if ad_k_mm > 0.0 {
                ad_k_mm
            } else {
                defaults.ad.k_mm
            },
        },
        seg: SegParams {
            felz_k: if felz_k > 0.0 {
                felz_k
            } else {
                defaults.seg.felz_k
            },
            min_region_px: if min_region_px > 0 {
                min_region_px
            } else {
                defaults.seg.min_region_px
            },
        },
    };
    let out = match pipeline::run(&depth.0, &sources, &calib.0, &params) {
        Ok(out) => out,
        Err(e) => return fail(e),
    };
    if !timings.is_null() {
        unsafe {
            *timings = DfTimings {
                preprocess_ms: out.timings.preprocess_ms,
                segment_ms: out.timings.segment_ms,
                select_ms: out.timings.select_ms,
                total_ms: out.timings.total_ms,
            };
        }
    }
    if !fused_out.is_null() {
        unsafe { *fused_out = Box::into_raw(Box::new(DfColorImage(out.fused))) };
    }
    if !labels_out.is_null() {
        unsafe { *labels_out = Box::into_raw(Box::new(DfLabelMap(out.labels))) };
    }
    if !segmentation_out.is_null() {
        unsafe { *segmentation_out = Box::into_raw(Box::new(DfSegmentation(out.segmentation))) };
    }
    DfStatus::Ok
}

/// # Safety
/// `seg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_segmentation_region_count(seg: *const DfSegmentation) -> size_t {
    unsafe { seg.as_ref() }.map_or(0, |s| s.0.region_count())
}

/// Copies per-pixel region labels into `buffer` (`len` = `width*height`).
///
/// # Safety
/// `buffer` must point to `len` writable `uint32_t`s.
#[no_mangle]
pub unsafe extern "C" fn df_segmentation_copy_labels(
    seg: *const DfSegmentation,
    buffer: *mut u32,
    len: size_t,
) -> DfStatus {
    let seg = require!(seg, "seg");
    if buffer.is_null() {
        return null_arg("buffer");
    }
    let labels = seg.0.labels();
    if len != labels.len() {
        return remember(
            format!("buffer holds {len} labels, expected {}", labels.len()),
            DfStatus::InvalidArgument,
        );
    }
    unsafe { std::slice::from_raw_parts_mut(buffer, len) }.copy_from_slice(labels);
    DfStatus::Ok
}

/// # Safety
/// `seg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_segmentation_free(seg: *mut DfSegmentation) {
    if !seg.is_null() {
        drop(unsafe { Box::from_raw(seg) });
    }
}

/// Copies per-pixel source indices into `buffer` (`len` = `width*height`).
///
/// # Safety
/// `buffer` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn df_label_map_copy_data(
    labels: *const DfLabelMap,
    buffer: *mut u8,
    len: size_t,
) -> DfStatus {
    let labels = require!(labels, "labels");
    if buffer.is_null() {
        return null_arg("buffer");
    }
    let data = labels.0.labels();
    if len != data.len() {
        return remember(
            format!("buffer holds {len} labels, expected {}", data.len()),
            DfStatus::InvalidArgument,
        );
    }
    unsafe { std::slice::from_raw_parts_mut(buffer, len) }.copy_from_slice(data);
    DfStatus::Ok
}

/// # Safety
/// `labels` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_label_map_free(labels: *mut DfLabelMap) {
    if !labels.is_null() {
        drop(unsafe { Box::from_raw(labels) });
    }
}

// ---------------------------------------------------------------------------
// Metrics and DoF arithmetic
// ---------------------------------------------------------------------------

/// Scores a fused image against its two sources with all six metrics.
/// Individual metrics that cannot be computed leave NaN in their slot.
///
/// # Safety
/// All three image handles must be live; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_evaluate_metrics(
    source_a: *const DfColorImage,
    source_b: *const DfColorImage,
    fused: *const DfColorImage,
    report: *mut DfMetricReport,
) -> DfStatus {
    let a = require!(source_a, "source_a");
    let b = require!(source_b, "source_b");
    let f = require!(fused, "fused");
    if report.is_null() {
        return null_arg("report");
    }
    match metrics::evaluate_all(&a.0, &b.0, &f.0, &MetricParams::default()) {
        Ok((r, _failures)) => {
            unsafe {
                *report = DfMetricReport {
                    q_mi: r.q_mi,
                    q_ncie: r.q_ncie,
                    q_g: r.q_g,
                    q_p: r.q_p,
                    q_y: r.q_y,
                    q_cb: r.q_cb,
                };
            }
            DfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

fn optics_of(f_mm: f64, f_number: f64, coc_mm: f64) -> OpticsConfig {
    OpticsConfig {
        f_mm,
        f_number,
        coc_mm,
        pixel_pitch_mm: 1.0,
    }
}

/// Back depth of field at focus distance `u_mm`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_back_dof(
    u_mm: f64,
    f_mm: f64,
    f_number: f64,
    coc_mm: f64,
    out: *mut f64,
) -> DfStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match dof::back_dof(u_mm, &optics_of(f_mm, f_number, coc_mm)) {
        Ok(v) => {
            unsafe { *out = v };
            DfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Front depth of field at focus distance `u_mm`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_front_dof(
    u_mm: f64,
    f_mm: f64,
    f_number: f64,
    coc_mm: f64,
    out: *mut f64,
) -> DfStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match dof::front_dof(u_mm, &optics_of(f_mm, f_number, coc_mm)) {
        Ok(v) => {
            unsafe { *out = v };
            DfStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Whether the depth span `[min_mm, max_mm]` can appear in focus under one
/// setting; writes 1 or 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_dof_rule(
    min_mm: f64,
    max_mm: f64,
    f_mm: f64,
    f_number: f64,
    coc_mm: f64,
    out: *mut i32,
) -> DfStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match dof::dof_rule(min_mm, max_mm, &optics_of(f_mm, f_number, coc_mm)) {
        Ok(v) => {
            unsafe { *out = v as i32 };
            DfStatus::Ok
        }
        Err(e) => fail(e),
    }
}
