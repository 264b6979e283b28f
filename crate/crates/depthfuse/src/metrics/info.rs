//! Information-theoretic fusion metrics: normalized mutual information and
//! nonlinear correlation information entropy. Both work on 256-bin intensity
//! histograms normalized to probabilities.

use crate::raster::GrayImage;
use crate::{ensure_same_size, Result};

pub(crate) const BINS: usize = 256;

#[inline]
pub(crate) fn bin_of(v: f64) -> usize {
    v.round().clamp(0.0, 255.0) as usize
}

pub(crate) fn histogram(img: &GrayImage) -> Vec<f64> {
    let mut h = vec![0.0; BINS];
    for &v in img.samples() {
        h[bin_of(v)] += 1.0;
    }
    let n = img.samples().len() as f64;
    for b in &mut h {
        *b /= n;
    }
    h
}

pub(crate) fn joint_histogram(x: &GrayImage, y: &GrayImage) -> Vec<f64> {
    let mut h = vec![0.0; BINS * BINS];
    for (&a, &b) in x.samples().iter().zip(y.samples()) {
        h[bin_of(a) * BINS + bin_of(b)] += 1.0;
    }
    let n = x.samples().len() as f64;
    for b in &mut h {
        *b /= n;
    }
    h
}

/// Shannon entropy over a normalized distribution, in units of `log(base)`.
fn entropy(p: &[f64], base: f64) -> f64 {
    let scale = 1.0 / base.ln();
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln() * scale)
        .sum::<f64>()
}

fn mutual_information(x: &GrayImage, y: &GrayImage, base: f64) -> (f64, f64, f64) {
    let hx = entropy(&histogram(x), base);
    let hy = entropy(&histogram(y), base);
    let hxy = entropy(&joint_histogram(x, y), base);
    (hx, hy, hx + hy - hxy)
}

/// Normalized mutual information: how much of each source's information the
/// fused image retains, in `[0, 2]`. A term whose entropies vanish (both
/// images constant, hence identical up to intensity) contributes 1.
pub fn q_mi(a: &GrayImage, b: &GrayImage, f: &GrayImage) -> Result<f64> {
    ensure_same_size(a.size(), f.size())?;
    ensure_same_size(b.size(), f.size())?;
    let mut sum = 0.0;
    for src in [a, b] {
        let (hx, hf, mi) = mutual_information(src, f, 2.0);
        sum += if hx + hf == 0.0 { 1.0 } else { mi / (hx + hf) };
    }
    Ok(2.0 * sum)
}

/// Nonlinear correlation coefficient: base-256 mutual information.
fn ncc(x: &GrayImage, y: &GrayImage) -> f64 {
    mutual_information(x, y, BINS as f64).2
}

/// Eigenvalues of a symmetric 3x3 matrix via the closed-form characteristic
/// cubic (trigonometric method), descending order.
pub(crate) fn sym_eig3(m: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| b.partial_cmp(a).unwrap());
        return d;
    }
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let bm = |i: usize, j: usize| (m[i][j] - if i == j { q } else { 0.0 }) / p;
    let det_b = bm(0, 0) * (bm(1, 1) * bm(2, 2) - bm(1, 2) * bm(2, 1))
        - bm(0, 1) * (bm(1, 0) * bm(2, 2) - bm(1, 2) * bm(2, 0))
        + bm(0, 2) * (bm(1, 0) * bm(2, 1) - bm(1, 1) * bm(2, 0));
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

/// Nonlinear correlation information entropy of the correlation matrix built
/// from the pairwise coefficients of `(a, b, f)`, in `[0, 1]`. The
/// `0 * log 0` convention applies to vanishing eigenvalues.
pub fn q_ncie(a: &GrayImage, b: &GrayImage, f: &GrayImage) -> Result<f64> {
    ensure_same_size(a.size(), f.size())?;
    ensure_same_size(b.size(), f.size())?;
    let ab = ncc(a, b);
    let af = ncc(a, f);
    let bf = ncc(b, f);
    let r = [[1.0, ab, af], [ab, 1.0, bf], [af, bf, 1.0]];
    let eig = sym_eig3(r);
    let ln_b = (BINS as f64).ln();
    let mut sum = 0.0;
    for lambda in eig {
        let x = lambda / 3.0;
        if x > 0.0 {
            sum += x * x.ln() / ln_b;
        }
    }
    Ok(1.0 + sum)
}
