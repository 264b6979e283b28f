//! Graph-based depth map segmentation constrained by the depth-of-field
//! rule.
//!
//! The depth map becomes a 4-connected grid graph whose edge weights are
//! absolute depth differences in millimeters. Edges are processed in
//! ascending weight order and two components merge only when both hold:
//!
//! 1. the classic region-comparison predicate (edge weight does not exceed
//!    either component's internal difference plus `k/size`), and
//! 2. the combined depth span still satisfies the DoF rule, so every pixel
//!    of the merged region can appear in focus under a single setting.
//!
//! The union-find structure carries per-component min/max depth so the DoF
//! test costs O(alpha) per edge.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calib::OpticsConfig;
use crate::dof;
use crate::raster::{DepthMap, INVALID_DEPTH};
use crate::{ensure_same_size, Error, Result};

/// Segmentation tuning. `felz_k` is the scale-of-observation constant in
/// millimeters; components smaller than `min_region_px` are folded into a
/// DoF-compatible neighbor afterwards. Connectivity is fixed at 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegParams {
    pub felz_k: f64,
    pub min_region_px: usize,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            felz_k: 100.0,
            min_region_px: 100,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.felz_k.is_finite() && self.felz_k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "felz_k must be positive (got {})",
                self.felz_k
            )));
        }
        if self.min_region_px == 0 {
            return Err(Error::InvalidParameter(
                "min_region_px must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Dense per-pixel region labels; every region is 4-connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl SegmentationMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    /// Serializes labels as a 16-bit PGM. Fails when more than 65536 regions
    /// exist.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        if self.region_count > 65536 {
            return Err(Error::TooManyRegions(self.region_count));
        }
        let samples: Vec<u16> = self.labels.iter().map(|&l| l as u16).collect();
        crate::io::write_pgm16(path, self.width, self.height, &samples)
    }
}

/// Per-region depth bookkeeping mirroring the Min/Max/Diff/MaxDoF scheme.
/// `max_dof_mm` is `None` when the region minimum lies beyond the hyperfocal
/// distance, where the back DoF is unbounded and the rule always passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub id: u32,
    pub pixel_count: usize,
    pub min_depth_mm: u16,
    pub max_depth_mm: u16,
    pub diff_mm: u16,
    pub max_dof_mm: Option<f64>,
    pub dof_ok: bool,
}

struct ComponentForest {
    parent: Vec<u32>,
    size: Vec<u32>,
    min_depth: Vec<u16>,
    max_depth: Vec<u16>,
    depth_sum: Vec<u64>,
    int_diff: Vec<f64>,
}

impl ComponentForest {
    fn new(depths: &[u16]) -> Self {
        let n = depths.len();
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            min_depth: depths.to_vec(),
            max_depth: depths.to_vec(),
            depth_sum: depths.iter().map(|&d| d as u64).collect(),
            int_diff: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Merges `b` into `a` (by size), recording the merging edge weight as
    /// the new internal difference. Edges arrive in ascending order, so that
    /// weight dominates both previous internal differences.
    fn union(&mut self, a: u32, b: u32, weight: f64) -> u32 {
        let (big, small) = if self.size[a as usize] >= self.size[b as usize] {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.min_depth[big as usize] =
            self.min_depth[big as usize].min(self.min_depth[small as usize]);
        self.max_depth[big as usize] =
            self.max_depth[big as usize].max(self.max_depth[small as usize]);
        self.depth_sum[big as usize] += self.depth_sum[small as usize];
        self.int_diff[big as usize] = self.int_diff[big as usize]
            .max(self.int_diff[small as usize])
            .max(weight);
        big
    }

    fn mean_depth(&self, root: u32) -> f64 {
        self.depth_sum[root as usize] as f64 / self.size[root as usize] as f64
    }
}

fn dof_rule_spans(min: u16, max: u16, optics: &OpticsConfig) -> bool {
    // Depths here are valid (> 0) and ordered, so the only special case is
    // the hyperfocal one, which passes unconditionally.
    match dof::max_dof(min as f64, max as f64, optics) {
        Ok(Some(limit)) => ((max - min) as f64) < limit,
        _ => true,
    }
}

/// Segments a fully valid depth map. See the module docs for the merge
/// criteria; labels come out dense and deterministic.
pub fn segment_depth(
    d: &DepthMap,
    optics: &OpticsConfig,
    params: &SegParams,
) -> Result<SegmentationMap> {
    params.validate()?;
    optics.validate()?;
    let holes = d.hole_count();
    if holes > 0 {
        return Err(Error::HolesPresent(holes));
    }
    let (w, h) = d.size();
    let n = w * h;
    let depths = d.samples();

    // Grid edges bucketed by weight: a counting sort over the 16-bit
    // difference range keeps ordering by (weight, source, target) without a
    // comparison sort. Generation order is raster source then right-before-
    // down, which is ascending target for a fixed source.
    let edge_count = (w - 1) * h + w * (h - 1);
    let mut bucket_counts = vec![0u32; 65536];
    let weight_of = |a: usize, b: usize| depths[a].abs_diff(depths[b]);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                bucket_counts[weight_of(i, i + 1) as usize] += 1;
            }
            if y + 1 < h {
                bucket_counts[weight_of(i, i + w) as usize] += 1;
            }
        }
    }
    let mut offsets = vec![0u32; 65536];
    let mut acc = 0u32;
    for (o, c) in offsets.iter_mut().zip(bucket_counts.iter()) {
        *o = acc;
        acc += c;
    }
    debug_assert_eq!(acc as usize, edge_count);
    let mut edges = vec![(0u32, 0u32); edge_count];
    let mut cursor = offsets.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                let wgt = weight_of(i, i + 1) as usize;
                edges[cursor[wgt] as usize] = (i as u32, (i + 1) as u32);
                cursor[wgt] += 1;
            }
            if y + 1 < h {
                let wgt = weight_of(i, i + w) as usize;
                edges[cursor[wgt] as usize] = (i as u32, (i + w) as u32);
                cursor[wgt] += 1;
            }
        }
    }

    let mut forest = ComponentForest::new(depths);
    for (wgt, (&start, &count)) in offsets.iter().zip(bucket_counts.iter()).enumerate() {
        for &(a, b) in &edges[start as usize..(start + count) as usize] {
            let ra = forest.find(a);
            let rb = forest.find(b);
            if ra == rb {
                continue;
            }
            let weight = wgt as f64;
            let thr_a =
                forest.int_diff[ra as usize] + params.felz_k / forest.size[ra as usize] as f64;
            let thr_b =
                forest.int_diff[rb as usize] + params.felz_k / forest.size[rb as usize] as f64;
            if weight > thr_a.min(thr_b) {
                continue;
            }
            let min = forest.min_depth[ra as usize].min(forest.min_depth[rb as usize]);
            let max = forest.max_depth[ra as usize].max(forest.max_depth[rb as usize]);
            if !dof_rule_spans(min, max, optics) {
                continue;
            }
            forest.union(ra, rb, weight);
        }
    }

    // Fold undersized components into the DoF-compatible adjacent component
    // with the closest mean depth. Iterate to a fixed point; each pass scans
    // the edge list once in sorted order, so candidate discovery stays
    // deterministic. Candidates live in a dense per-root table.
    if params.min_region_px > 1 {
        let mut best: Vec<(f64, u32)> = vec![(f64::INFINITY, u32::MAX); n];
        loop {
            let mut smalls: Vec<u32> = Vec::new();
            for &(a, b) in &edges {
                let ra = forest.find(a);
                let rb = forest.find(b);
                if ra == rb {
                    continue;
                }
                for (small, other) in [(ra, rb), (rb, ra)] {
                    if (forest.size[small as usize] as usize) >= params.min_region_px {
                        continue;
                    }
                    let min =
                        forest.min_depth[small as usize].min(forest.min_depth[other as usize]);
                    let max =
                        forest.max_depth[small as usize].max(forest.max_depth[other as usize]);
                    if !dof_rule_spans(min, max, optics) {
                        continue;
                    }
                    let gap = (forest.mean_depth(small) - forest.mean_depth(other)).abs();
                    let entry = &mut best[small as usize];
                    if entry.1 == u32::MAX {
                        smalls.push(small);
                    }
                    if gap < entry.0 || (gap == entry.0 && other < entry.1) {
                        *entry = (gap, other);
                    }
                }
            }
            if smalls.is_empty() {
                break;
            }
            smalls.sort_unstable();
            let mut merged_any = false;
            for &small in &smalls {
                let (_, target) = best[small as usize];
                best[small as usize] = (f64::INFINITY, u32::MAX);
                let rs = forest.find(small);
                let rt = forest.find(target);
                if rs != small || rs == rt {
                    // The candidate was computed before earlier merges this
                    // pass; re-evaluate it next round.
                    continue;
                }
                // Re-check the rule against current component extents.
                let min = forest.min_depth[rs as usize].min(forest.min_depth[rt as usize]);
                let max = forest.max_depth[rs as usize].max(forest.max_depth[rt as usize]);
                if !dof_rule_spans(min, max, optics) {
                    continue;
                }
                forest.union(rs, rt, 0.0);
                merged_any = true;
            }
            if !merged_any {
                break;
            }
        }
    }

    // Compact labels in raster-scan first-visit order.
    let mut label_of_root = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut next = 0u32;
    for (i, label) in labels.iter_mut().enumerate() {
        let root = forest.find(i as u32) as usize;
        if label_of_root[root] == u32::MAX {
            label_of_root[root] = next;
            next += 1;
        }
        *label = label_of_root[root];
    }
    Ok(SegmentationMap {
        width: w,
        height: h,
        labels,
        region_count: next as usize,
    })
}

/// Min/Max/Diff/MaxDoF bookkeeping for every region of a segmentation.
pub fn region_stats(
    seg: &SegmentationMap,
    d: &DepthMap,
    optics: &OpticsConfig,
) -> Result<Vec<RegionStats>> {
    ensure_same_size(seg.size(), d.size())?;
    let mut min = vec![u16::MAX; seg.region_count()];
    let mut max = vec![0u16; seg.region_count()];
    let mut count = vec![0usize; seg.region_count()];
    for (&label, &depth) in seg.labels().iter().zip(d.samples().iter()) {
        let l = label as usize;
        min[l] = min[l].min(depth);
        max[l] = max[l].max(depth);
        count[l] += 1;
    }
    (0..seg.region_count())
        .map(|l| {
            if min[l] == INVALID_DEPTH {
                return Err(Error::HolesPresent(1));
            }
            let max_dof_mm = dof::max_dof(min[l] as f64, max[l] as f64, optics)?;
            let diff_mm = max[l] - min[l];
            Ok(RegionStats {
                id: l as u32,
                pixel_count: count[l],
                min_depth_mm: min[l],
                max_depth_mm: max[l],
                diff_mm,
                max_dof_mm,
                dof_ok: max_dof_mm.is_none_or(|limit| (diff_mm as f64) < limit),
            })
        })
        .collect()
}

/// Writes the stats sidecar next to a segmentation PGM.
pub fn write_region_stats(path: &Path, stats: &[RegionStats]) -> Result<()> {
    let text = serde_json::to_string_pretty(stats)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
