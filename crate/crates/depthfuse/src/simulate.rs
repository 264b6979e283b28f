//! Thin-lens defocus simulator.
//!
//! Generates synthetic multi-focus stacks with known ground truth so every
//! pipeline stage is verifiable without camera hardware: textured depth
//! layers are blurred per focus setting according to the exact thin-lens
//! blur circle, the true depth map is degraded with the hole and
//! misalignment artifacts a structured-light sensor produces, and the
//! expected in-focus source per layer is recorded for checking selection.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{Calibration, CameraIntrinsics, Extrinsics, OpticsConfig, SensorRange};
use crate::dof;
use crate::filter;
use crate::fusion::ImageStack;
use crate::raster::{ColorImage, DepthMap, GrayImage, INVALID_DEPTH};
use crate::{Error, Result};

/// Where a layer lives in the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRegion {
    Background,
    Rect {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

/// One textured depth plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub depth_mm: f64,
    pub region: LayerRegion,
    pub texture_seed: u64,
}

/// Sensor-artifact model applied to the true depth map: a hole band left of
/// depth discontinuities, an extrinsic misalignment the pipeline must undo,
/// and uniform depth jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub hole_band_px: usize,
    pub extrinsic_shift: Extrinsics,
    pub depth_noise_mm: u16,
}

impl Default for Degradation {
    fn default() -> Self {
        Self {
            hole_band_px: 0,
            extrinsic_shift: Extrinsics::identity(),
            depth_noise_mm: 0,
        }
    }
}

/// Full synthetic scene description, ingested as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub image_size: (usize, usize),
    #[serde(default)]
    pub seed: u64,
    pub optics: OpticsConfig,
    pub layers: Vec<Layer>,
    pub focus_depths_mm: Vec<f64>,
    #[serde(default)]
    pub degradation: Degradation,
    #[serde(default)]
    pub sensor_range: SensorRange,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        let (w, h) = self.image_size;
        if w == 0 || h == 0 {
            return Err(Error::InvalidScene(format!("image size {w}x{h}")));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidScene("no layers".into()));
        }
        if self.layers[0].region != LayerRegion::Background {
            return Err(Error::InvalidScene(
                "the first layer must cover the background".into(),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !(layer.depth_mm.is_finite() && layer.depth_mm > self.optics.f_mm) {
                return Err(Error::InvalidScene(format!(
                    "layer {i} depth {} mm not beyond the focal length",
                    layer.depth_mm
                )));
            }
            let d = layer.depth_mm.round();
            if d < self.sensor_range.min_mm as f64 || d > self.sensor_range.max_mm as f64 {
                return Err(Error::InvalidScene(format!(
                    "layer {i} depth {} mm outside sensor range [{}, {}]",
                    layer.depth_mm, self.sensor_range.min_mm, self.sensor_range.max_mm
                )));
            }
            if i > 0 {
                match layer.region {
                    LayerRegion::Background => {
                        return Err(Error::InvalidScene(format!(
                            "layer {i} duplicates the background"
                        )))
                    }
                    LayerRegion::Rect {
                        x,
                        y,
                        width,
                        height,
                    } => {
                        if width == 0 || height == 0 || x + width > w || y + height > h {
                            return Err(Error::InvalidScene(format!(
                                "layer {i} rect out of bounds"
                            )));
                        }
                    }
                }
            }
        }
        if self.focus_depths_mm.is_empty() {
            return Err(Error::InvalidScene("no focus depths".into()));
        }
        for &f in &self.focus_depths_mm {
            if !(f.is_finite() && f > self.optics.f_mm) {
                return Err(Error::InvalidScene(format!(
                    "focus depth {f} mm not beyond the focal length"
                )));
            }
        }
        self.degradation.extrinsic_shift.validate()?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SceneSpec =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Pinhole intrinsics of the synthetic cameras (Kinect-like focal scale
    /// adjusted to the image size).
    pub fn intrinsics(&self) -> CameraIntrinsics {
        let (w, h) = self.image_size;
        let fx = 525.0 * w as f64 / 640.0;
        CameraIntrinsics {
            fx,
            fy: fx,
            u0: (w as f64 - 1.0) / 2.0,
            v0: (h as f64 - 1.0) / 2.0,
        }
    }

    /// The calibration bundle matching this scene: identical synthetic
    /// cameras separated by the degradation's extrinsic shift.
    pub fn calibration(&self) -> Calibration {
        let intr = self.intrinsics();
        Calibration {
            ir_intrinsics: intr,
            color_intrinsics: intr,
            extrinsics: self.degradation.extrinsic_shift.clone(),
            optics: self.optics,
            sensor_range: self.sensor_range,
        }
    }
}

/// Which source should win a layer, and whether the layer's depth sits
/// inside that source's depth of field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerGroundTruth {
    pub depth_mm: f64,
    pub best_focus: usize,
    pub in_dof: bool,
}

/// Everything the renderer knows about a scene.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub stack: ImageStack,
    pub ground_truth: ColorImage,
    pub true_depth: DepthMap,
    /// Topmost layer index per pixel.
    pub layer_of_pixel: Vec<u8>,
    pub layer_info: Vec<LayerGroundTruth>,
}

fn texture_planes(spec: &SceneSpec, layer: &Layer) -> [GrayImage; 3] {
    let (w, h) = spec.image_size;
    let mut rng = ChaCha8Rng::seed_from_u64(
        spec.seed ^ layer.texture_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let mut base = [0.0f64; 3];
    for b in base.iter_mut() {
        *b = rng.gen_range(80.0..=170.0);
    }
    std::array::from_fn(|c| {
        let raw: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-75.0..=75.0)).collect();
        let noise =
            filter::gaussian_blur(&GrayImage::from_samples(w, h, raw).expect("finite"), 1.0);
        GrayImage::from_samples(
            w,
            h,
            noise
                .samples()
                .iter()
                .map(|&v| (base[c] + 1.8 * v).clamp(0.0, 255.0))
                .collect(),
        )
        .expect("finite")
    })
}

fn layer_mask(spec: &SceneSpec) -> Vec<u8> {
    let (w, h) = spec.image_size;
    let mut mask = vec![0u8; w * h];
    for (i, layer) in spec.layers.iter().enumerate().skip(1) {
        if let LayerRegion::Rect {
            x,
            y,
            width,
            height,
        } = layer.region
        {
            for yy in y..y + height {
                for xx in x..x + width {
                    mask[yy * w + xx] = i as u8;
                }
            }
        }
    }
    mask
}

/// Composites one output image for a given focus depth (`None` renders the
/// unblurred ground truth).
fn composite(
    spec: &SceneSpec,
    textures: &[[GrayImage; 3]],
    mask: &[u8],
    focus_mm: Option<f64>,
) -> Result<ColorImage> {
    let (w, h) = spec.image_size;
    let mut planes: Vec<[GrayImage; 3]> = Vec::with_capacity(spec.layers.len());
    for (layer, tex) in spec.layers.iter().zip(textures) {
        let sigma = match focus_mm {
            Some(f) => {
                dof::coc_diameter(layer.depth_mm, f, &spec.optics)?
                    / (2.0 * spec.optics.pixel_pitch_mm)
            }
            None => 0.0,
        };
        if sigma > 1e-6 {
            planes.push(std::array::from_fn(|c| {
                filter::gaussian_blur(&tex[c], sigma)
            }));
        } else {
            planes.push(tex.clone());
        }
    }
    let mut out = ColorImage::new(w, h)?;
    for y in 0..h {
        for x in 0..w {
            let layer = mask[y * w + x] as usize;
            let px =
                std::array::from_fn(|c| planes[layer][c].get(x, y).round().clamp(0.0, 255.0) as u8);
            out.set_pixel(x, y, px);
        }
    }
    Ok(out)
}

/// Renders the multi-focus stack, the all-in-focus ground truth, and the
/// true depth map for a scene.
pub fn render_stack(spec: &SceneSpec) -> Result<RenderedScene> {
    spec.validate()?;
    let (w, h) = spec.image_size;
    let textures: Vec<[GrayImage; 3]> = spec
        .layers
        .iter()
        .map(|l| texture_planes(spec, l))
        .collect();
    let mask = layer_mask(spec);

    let mut jobs: Vec<Option<f64>> = spec.focus_depths_mm.iter().copied().map(Some).collect();
    jobs.push(None);
    let mut rendered: Vec<ColorImage> = jobs
        .par_iter()
        .map(|focus| composite(spec, &textures, &mask, *focus))
        .collect::<Result<_>>()?;
    let ground_truth = rendered.pop().expect("ground-truth job");
    let stack = ImageStack::new(rendered)?;

    let mut true_depth = DepthMap::new(w, h)?;
    for y in 0..h {
        for x in 0..w {
            let d = spec.layers[mask[y * w + x] as usize].depth_mm.round();
            true_depth.set(x, y, d.clamp(1.0, 65535.0) as u16);
        }
    }

    let layer_info = spec
        .layers
        .iter()
        .map(|layer| {
            let mut best = 0usize;
            let mut best_coc = f64::INFINITY;
            for (j, &f) in spec.focus_depths_mm.iter().enumerate() {
                let c = dof::coc_diameter(layer.depth_mm, f, &spec.optics)?;
                if c < best_coc {
                    best_coc = c;
                    best = j;
                }
            }
            let focus = spec.focus_depths_mm[best];
            let front = dof::front_dof(focus, &spec.optics)?;
            let in_dof = match dof::back_dof(focus, &spec.optics) {
                Ok(back) => layer.depth_mm >= focus - front && layer.depth_mm <= focus + back,
                Err(_) => layer.depth_mm >= focus - front,
            };
            Ok(LayerGroundTruth {
                depth_mm: layer.depth_mm,
                best_focus: best,
                in_dof,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RenderedScene {
        stack,
        ground_truth,
        true_depth,
        layer_of_pixel: mask,
        layer_info,
    })
}

/// Applies the scene's degradation model to a clean depth map: hole bands
/// left of depth discontinuities above 100 mm, the inverse extrinsic warp
/// (so the alignment stage has real work to undo), and uniform depth jitter
/// on valid pixels. Zero degradation is the identity.
pub fn degrade_depth(true_depth: &DepthMap, spec: &SceneSpec) -> Result<DepthMap> {
    let (w, h) = true_depth.size();
    let deg = &spec.degradation;
    let mut out = true_depth.clone();

    if deg.hole_band_px > 0 {
        for y in 0..h {
            for x in 0..w.saturating_sub(1) {
                let a = true_depth.get(x, y);
                let b = true_depth.get(x + 1, y);
                if a.abs_diff(b) > 100 {
                    let start = (x + 1).saturating_sub(deg.hole_band_px);
                    for hole_x in start..=x {
                        out.set(hole_x, y, INVALID_DEPTH);
                    }
                }
            }
        }
    }

    if !deg.extrinsic_shift.is_identity() {
        // Splat from the color frame back into the depth camera frame; the
        // alignment stage applies the forward transform to undo this.
        let intr = spec.intrinsics();
        let (warped, _) = crate::depthprep::align_depth(
            &out,
            &intr,
            &intr,
            &deg.extrinsic_shift.inverse(),
            (w, h),
        )?;
        out = warped;
    }

    if deg.depth_noise_mm > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x0DE9_7A4E_0015_E11D);
        let noise = deg.depth_noise_mm as i32;
        let lo = spec.sensor_range.min_mm.max(1) as i32;
        let hi = spec.sensor_range.max_mm as i32;
        for y in 0..h {
            for x in 0..w {
                let d = out.get(x, y);
                if d == INVALID_DEPTH {
                    continue;
                }
                let jitter = rng.gen_range(-noise..=noise);
                out.set(x, y, (d as i32 + jitter).clamp(lo, hi) as u16);
            }
        }
    }
    Ok(out)
}

/// Chebyshev-dilated region-boundary mask: true where any pixel within
/// `band_px` carries a different layer.
pub fn boundary_mask(
    layer_of_pixel: &[u8],
    width: usize,
    height: usize,
    band_px: usize,
) -> Vec<bool> {
    let band = band_px as isize;
    let mut mask = vec![false; width * height];
    for y in 0..height as isize {
        for x in 0..width as isize {
            let own = layer_of_pixel[y as usize * width + x as usize];
            'search: for dy in -band..=band {
                for dx in -band..=band {
                    let nx = x + dx;
                    let ny = y + dy;
                    if nx >= 0
                        && ny >= 0
                        && nx < width as isize
                        && ny < height as isize
                        && layer_of_pixel[ny as usize * width + nx as usize] != own
                    {
                        mask[y as usize * width + x as usize] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    mask
}

/// Peak signal-to-noise ratio in dB over RGB samples, skipping pixels where
/// `excluded` is true. Identical images give infinity.
pub fn psnr(result: &ColorImage, reference: &ColorImage, excluded: &[bool]) -> Result<f64> {
    crate::ensure_same_size(result.size(), reference.size())?;
    let (w, h) = result.size();
    if excluded.len() != w * h {
        return Err(Error::SampleCountMismatch {
            expected: w * h,
            got: excluded.len(),
        });
    }
    let mut sq = 0.0f64;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if excluded[y * w + x] {
                continue;
            }
            let a = result.pixel(x, y);
            let b = reference.pixel(x, y);
            for c in 0..3 {
                let d = a[c] as f64 - b[c] as f64;
                sq += d * d;
            }
            n += 3;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mse = sq / n as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    })
}

/// File listing produced by [`write_scene_bundle`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneManifest {
    pub sources: Vec<String>,
    pub ground_truth: String,
    pub true_depth: String,
    pub degraded_depth: String,
    pub calibration: String,
    pub focus_depths_mm: Vec<f64>,
    pub layer_info: Vec<LayerGroundTruth>,
}

/// Renders a scene and writes the whole dataset (sources, ground truth,
/// true and degraded depth, calibration, manifest) into `dir`. Returns the
/// manifest.
pub fn write_scene_bundle(dir: &Path, spec: &SceneSpec) -> Result<SceneManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scene = render_stack(spec)?;
    let degraded = degrade_depth(&scene.true_depth, spec)?;

    let mut sources = Vec::new();
    for (i, src) in scene.stack.sources().iter().enumerate() {
        let name = format!("source_{i}.png");
        crate::io::write_color_png(&dir.join(&name), src)?;
        sources.push(name);
    }
    crate::io::write_color_png(&dir.join("ground_truth.png"), &scene.ground_truth)?;
    crate::io::write_depth_pgm(&dir.join("true_depth.pgm"), &scene.true_depth)?;
    crate::io::write_depth_pgm(&dir.join("degraded_depth.pgm"), &degraded)?;
    spec.calibration()
        .to_json_file(&dir.join("calibration.json"))?;

    let manifest = SceneManifest {
        sources,
        ground_truth: "ground_truth.png".into(),
        true_depth: "true_depth.pgm".into(),
        degraded_depth: "degraded_depth.pgm".into(),
        calibration: "calibration.json".into(),
        focus_depths_mm: spec.focus_depths_mm.clone(),
        layer_info: scene.layer_info.clone(),
    };
    let path: PathBuf = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
