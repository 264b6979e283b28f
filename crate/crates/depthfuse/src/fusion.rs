//! In-focus source selection and all-in-focus composition.
//!
//! Each segmented region is scored against every source image with a mean
//! squared Laplacian sharpness measure; the winning source index forms a
//! label map, which for two-source stacks degenerates to the classic binary
//! weight map, and composition is per-pixel selection.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::filter;
use crate::raster::{rgb_to_gray, ColorImage, GrayImage};
use crate::segment::SegmentationMap;
use crate::{ensure_same_size, Error, Result};

/// Ordered multi-focus source images sharing one geometry.
#[derive(Debug, Clone)]
pub struct ImageStack {
    sources: Vec<ColorImage>,
}

impl ImageStack {
    pub fn new(sources: Vec<ColorImage>) -> Result<Self> {
        if sources.len() < 2 {
            return Err(Error::StackTooSmall(sources.len()));
        }
        if sources.len() > 256 {
            return Err(Error::StackTooLarge(sources.len()));
        }
        let size = sources[0].size();
        for s in &sources[1..] {
            ensure_same_size(size, s.size())?;
        }
        Ok(Self { sources })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn size(&self) -> (usize, usize) {
        self.sources[0].size()
    }

    pub fn source(&self, i: usize) -> &ColorImage {
        &self.sources[i]
    }

    pub fn sources(&self) -> &[ColorImage] {
        &self.sources
    }
}

/// Per-pixel chosen-source indices, constant within each segmentation region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    num_sources: usize,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>, num_sources: usize) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::SampleCountMismatch {
                expected: width * height,
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= num_sources) {
            return Err(Error::SourceIndexOutOfRange {
                index: bad as usize,
                sources: num_sources,
            });
        }
        Ok(Self {
            width,
            height,
            labels,
            num_sources,
        })
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    /// 8-bit PGM of raw source indices.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(32 + self.labels.len());
        write!(out, "P5\n{} {}\n255\n", self.width, self.height).expect("vec write");
        out.extend_from_slice(&self.labels);
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Per-pixel fusion coefficient in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl WeightMap {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != width * height {
            return Err(Error::SampleCountMismatch {
                expected: width * height,
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParameter(format!(
                "weight at index {i} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            weights,
        })
    }

    pub fn constant(width: usize, height: usize, w: f64) -> Result<Self> {
        Self::new(width, height, vec![w; width * height])
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// 8-bit PGM; binary maps serialize as pure 0/255.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(32 + self.weights.len());
        write!(out, "P5\n{} {}\n255\n", self.width, self.height).expect("vec write");
        out.extend(self.weights.iter().map(|&w| (w * 255.0).round() as u8));
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn squared_laplacian(gray: &GrayImage) -> Vec<f64> {
    filter::laplacian(gray)
        .samples()
        .iter()
        .map(|&v| v * v)
        .collect()
}

/// Mean squared Laplacian over the interior of `mask` (pixels whose full
/// in-bounds 3x3 neighborhood lies in the mask, so defocus leaking across
/// the region boundary does not vote). Falls back to the whole mask when the
/// interior is empty. Higher means sharper; a constant region scores 0.
pub fn focus_measure(img: &GrayImage, mask: &[bool]) -> Result<f64> {
    let (w, h) = img.size();
    if mask.len() != w * h {
        return Err(Error::SampleCountMismatch {
            expected: w * h,
            got: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let lap2 = squared_laplacian(img);
    let interior = |x: usize, y: usize| {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0
                    && ny >= 0
                    && nx < w as isize
                    && ny < h as isize
                    && !mask[ny as usize * w + nx as usize]
                {
                    return false;
                }
            }
        }
        true
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            if mask[y * w + x] && interior(x, y) {
                sum += lap2[y * w + x];
                count += 1;
            }
        }
    }
    if count == 0 {
        // Degenerate thin region: use every masked pixel.
        for (i, &m) in mask.iter().enumerate() {
            if m {
                sum += lap2[i];
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}

/// Picks, for every region, the source with the highest sharpness score.
/// Ties resolve to the lowest source index.
pub fn select_in_focus(stack: &ImageStack, seg: &SegmentationMap) -> Result<LabelMap> {
    ensure_same_size(stack.size(), seg.size())?;
    let (w, h) = seg.size();
    let regions = seg.region_count();
    let labels = seg.labels();

    // A pixel is interior when its whole in-bounds 3x3 neighborhood shares
    // its label.
    let mut interior = vec![true; w * h];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            'scan: for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx >= 0
                        && ny >= 0
                        && nx < w as isize
                        && ny < h as isize
                        && labels[ny as usize * w + nx as usize] != l
                    {
                        interior[y * w + x] = false;
                        break 'scan;
                    }
                }
            }
        }
    }

    // (interior sum, interior count, full sum, full count) per region/source.
    let per_source: Vec<Vec<(f64, usize, f64, usize)>> = stack
        .sources()
        .par_iter()
        .map(|src| {
            let lap2 = squared_laplacian(&rgb_to_gray(src));
            let mut acc = vec![(0.0, 0usize, 0.0, 0usize); regions];
            for (i, &l) in labels.iter().enumerate() {
                let a = &mut acc[l as usize];
                a.2 += lap2[i];
                a.3 += 1;
                if interior[i] {
                    a.0 += lap2[i];
                    a.1 += 1;
                }
            }
            acc
        })
        .collect();

    let mut region_label = vec![0u8; regions];
    for r in 0..regions {
        let mut best = f64::NEG_INFINITY;
        let mut best_src = 0usize;
        for (s, acc) in per_source.iter().enumerate() {
            let (isum, icount, fsum, fcount) = acc[r];
            let score = if icount > 0 {
                isum / icount as f64
            } else {
                fsum / fcount as f64
            };
            if score > best {
                best = score;
                best_src = s;
            }
        }
        region_label[r] = best_src as u8;
    }

    let out = labels.iter().map(|&l| region_label[l as usize]).collect();
    LabelMap::new(w, h, out, stack.len())
}

/// Binary weight map for a two-source stack: 1.0 where the label names
/// `source_index`, 0.0 elsewhere.
pub fn weight_map(labels: &LabelMap, source_index: usize) -> Result<WeightMap> {
    if labels.num_sources() != 2 {
        return Err(Error::NotTwoSources(labels.num_sources()));
    }
    if source_index >= 2 {
        return Err(Error::SourceIndexOutOfRange {
            index: source_index,
            sources: 2,
        });
    }
    let weights = labels
        .labels()
        .iter()
        .map(|&l| if l as usize == source_index { 1.0 } else { 0.0 })
        .collect();
    WeightMap::new(labels.size().0, labels.size().1, weights)
}

/// Composites the all-in-focus image by per-pixel selection. With binary
/// weights the two-source blend `(1-W)*A + W*B` reduces to exactly this.
pub fn fuse(stack: &ImageStack, labels: &LabelMap) -> Result<ColorImage> {
    ensure_same_size(stack.size(), labels.size())?;
    if labels.num_sources() != stack.len() {
        return Err(Error::SourceIndexOutOfRange {
            index: labels.num_sources().saturating_sub(1),
            sources: stack.len(),
        });
    }
    let (w, h) = stack.size();
    let mut out = ColorImage::new(w, h)?;
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, stack.source(labels.get(x, y) as usize).pixel(x, y));
        }
    }
    Ok(out)
}

/// Real-weighted two-source blend `(1-W)*A + W*B`, rounded to the nearest
/// integer per channel.
pub fn fuse_weighted(a: &ColorImage, b: &ColorImage, w: &WeightMap) -> Result<ColorImage> {
    ensure_same_size(a.size(), b.size())?;
    ensure_same_size(a.size(), w.size())?;
    let (width, height) = a.size();
    let mut out = ColorImage::new(width, height)?;
    let weights = w.weights();
    for y in 0..height {
        for x in 0..width {
            let wv = weights[y * width + x];
            let pa = a.pixel(x, y);
            let pb = b.pixel(x, y);
            let mut px = [0u8; 3];
            for c in 0..3 {
                let v = (1.0 - wv) * pa[c] as f64 + wv * pb[c] as f64;
                px[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            out.set_pixel(x, y, px);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::OpticsConfig;
    use crate::raster::DepthMap;
    use crate::segment::{segment_depth, SegParams};

    fn gray_from(rows: &[&[f64]]) -> GrayImage {
        let h = rows.len();
        let w = rows[0].len();
        let mut flat = Vec::new();
        for r in rows {
            flat.extend_from_slice(r);
        }
        GrayImage::from_samples(w, h, flat).unwrap()
    }

    fn noise_image(w: usize, h: usize, seed: u64) -> ColorImage {
        let mut state = seed | 1;
        let mut img = ColorImage::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                let mut px = [0u8; 3];
                for p in px.iter_mut() {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    *p = (state >> 56) as u8;
                }
                img.set_pixel(x, y, px);
            }
        }
        img
    }

    #[test]
    fn constant_region_scores_zero() {
        let img = GrayImage::from_samples(6, 6, vec![9.0; 36]).unwrap();
        let mask = vec![true; 36];
        assert_eq!(focus_measure(&img, &mask).unwrap(), 0.0);
    }

    #[test]
    fn sharp_beats_blurred() {
        let sharp = rgb_to_gray(&noise_image(24, 24, 5));
        let blurred = filter::gaussian_blur(&sharp, 2.0);
        let mask = vec![true; 24 * 24];
        let s = focus_measure(&sharp, &mask).unwrap();
        let b = focus_measure(&blurred, &mask).unwrap();
        assert!(s > b, "sharp {s} vs blurred {b}");
    }

    #[test]
    fn score_ignores_constant_offset() {
        let img = rgb_to_gray(&noise_image(16, 16, 9));
        let shifted =
            GrayImage::from_samples(16, 16, img.samples().iter().map(|v| v + 40.0).collect())
                .unwrap();
        let mask = vec![true; 256];
        let a = focus_measure(&img, &mask).unwrap();
        let b = focus_measure(&shifted, &mask).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let img = gray_from(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!(matches!(
            focus_measure(&img, &[false; 4]),
            Err(Error::EmptyMask)
        ));
    }

    fn split_scene() -> (ImageStack, SegmentationMap) {
        // Left half sharp in source 0, right half sharp in source 1.
        let w = 40;
        let h = 20;
        let sharp = noise_image(w, h, 77);
        let sharp_gray = rgb_to_gray(&sharp);
        let blurred_gray = filter::gaussian_blur(&sharp_gray, 2.5);
        let mut a = ColorImage::new(w, h).unwrap();
        let mut b = ColorImage::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                let sharp_px = sharp.pixel(x, y);
                let blur_v = blurred_gray.get(x, y).round().clamp(0.0, 255.0) as u8;
                let blur_px = [blur_v; 3];
                let gray_px = [sharp_gray.get(x, y).round().clamp(0.0, 255.0) as u8; 3];
                if x < w / 2 {
                    a.set_pixel(x, y, gray_px);
                    b.set_pixel(x, y, blur_px);
                } else {
                    a.set_pixel(x, y, blur_px);
                    b.set_pixel(x, y, gray_px);
                }
                let _ = sharp_px;
            }
        }
        let mut depth = DepthMap::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                depth.set(x, y, if x < w / 2 { 900 } else { 2600 });
            }
        }
        let seg = segment_depth(
            &depth,
            &OpticsConfig::default(),
            &SegParams {
                felz_k: 100.0,
                min_region_px: 1,
            },
        )
        .unwrap();
        assert_eq!(seg.region_count(), 2);
        let stack = ImageStack::new(vec![a, b]).unwrap();
        (stack, seg)
    }

    #[test]
    fn selection_picks_sharp_source_per_region() {
        let (stack, seg) = split_scene();
        let labels = select_in_focus(&stack, &seg).unwrap();
        let (w, h) = labels.size();
        for y in 0..h {
            for x in 0..w {
                assert_eq!(labels.get(x, y), if x < w / 2 { 0 } else { 1 });
            }
        }
    }

    #[test]
    fn identical_sources_tie_break_to_zero() {
        let img = noise_image(16, 8, 3);
        let stack = ImageStack::new(vec![img.clone(), img.clone(), img]).unwrap();
        let depth = DepthMap::from_samples(16, 8, vec![1500; 128]).unwrap();
        let seg = segment_depth(
            &depth,
            &OpticsConfig::default(),
            &SegParams {
                felz_k: 100.0,
                min_region_px: 1,
            },
        )
        .unwrap();
        let labels = select_in_focus(&stack, &seg).unwrap();
        assert!(labels.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn single_region_gets_single_index() {
        let sharp = noise_image(12, 12, 21);
        let gray = rgb_to_gray(&sharp);
        let soft = filter::gaussian_blur(&gray, 2.0);
        let mut b = ColorImage::new(12, 12).unwrap();
        for y in 0..12 {
            for x in 0..12 {
                b.set_pixel(x, y, [soft.get(x, y).round() as u8; 3]);
            }
        }
        let stack = ImageStack::new(vec![b, sharp]).unwrap();
        let depth = DepthMap::from_samples(12, 12, vec![2000; 144]).unwrap();
        let seg = segment_depth(
            &depth,
            &OpticsConfig::default(),
            &SegParams {
                felz_k: 100.0,
                min_region_px: 1,
            },
        )
        .unwrap();
        let labels = select_in_focus(&stack, &seg).unwrap();
        assert!(labels.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn weight_map_partitions_two_sources() {
        let (stack, seg) = split_scene();
        let labels = select_in_focus(&stack, &seg).unwrap();
        let w0 = weight_map(&labels, 0).unwrap();
        let w1 = weight_map(&labels, 1).unwrap();
        for (a, b) in w0.weights().iter().zip(w1.weights().iter()) {
            assert!(*a == 0.0 || *a == 1.0);
            assert_eq!(a + b, 1.0);
        }
    }

    #[test]
    fn weight_map_requires_two_sources() {
        let labels = LabelMap::new(2, 2, vec![0, 1, 2, 0], 3).unwrap();
        assert!(matches!(
            weight_map(&labels, 0),
            Err(Error::NotTwoSources(3))
        ));
    }

    #[test]
    fn fuse_with_binary_weights_is_exact_selection() {
        let (stack, seg) = split_scene();
        let labels = select_in_focus(&stack, &seg).unwrap();
        let fused = fuse(&stack, &labels).unwrap();
        let (w, h) = fused.size();
        for y in 0..h {
            for x in 0..w {
                let expected = stack.source(labels.get(x, y) as usize).pixel(x, y);
                assert_eq!(fused.pixel(x, y), expected);
            }
        }
        // Cross-check against the weighted form with a binary map.
        let wm = weight_map(&labels, 1).unwrap();
        let blended = fuse_weighted(stack.source(0), stack.source(1), &wm).unwrap();
        assert_eq!(blended, fused);
    }

    #[test]
    fn weighted_endpoints_and_midpoint() {
        let a = ColorImage::from_samples(2, 1, vec![100; 6]).unwrap();
        let b = ColorImage::from_samples(2, 1, vec![200; 6]).unwrap();
        let zeros = WeightMap::constant(2, 1, 0.0).unwrap();
        let ones = WeightMap::constant(2, 1, 1.0).unwrap();
        let half = WeightMap::constant(2, 1, 0.5).unwrap();
        assert_eq!(fuse_weighted(&a, &b, &zeros).unwrap(), a);
        assert_eq!(fuse_weighted(&a, &b, &ones).unwrap(), b);
        assert_eq!(
            fuse_weighted(&a, &b, &half).unwrap(),
            ColorImage::from_samples(2, 1, vec![150; 6]).unwrap()
        );
    }

    #[test]
    fn fusing_identical_copies_returns_the_image() {
        let img = noise_image(9, 7, 123);
        let stack = ImageStack::new(vec![img.clone(), img.clone(), img.clone()]).unwrap();
        let labels = LabelMap::new(9, 7, vec![2; 63], 3).unwrap();
        assert_eq!(fuse(&stack, &labels).unwrap(), img);
    }

    #[test]
    fn stack_validation() {
        let img = noise_image(4, 4, 1);
        assert!(matches!(
            ImageStack::new(vec![img.clone()]),
            Err(Error::StackTooSmall(1))
        ));
        let other = noise_image(5, 4, 2);
        assert!(matches!(
            ImageStack::new(vec![img, other]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
