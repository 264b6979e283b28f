//! Minimal 2-D FFT helpers over `rustfft`, used by the frequency-domain
//! metric kernels (contrast sensitivity filtering and the log-Gabor bank).

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward 2-D FFT, in place over a row-major `width x height` buffer.
pub fn fft2(data: &mut [Complex64], width: usize, height: usize) {
    transform(data, width, height, rustfft::FftDirection::Forward);
}

/// Inverse 2-D FFT, in place, normalized by `1/(width*height)`.
pub fn ifft2(data: &mut [Complex64], width: usize, height: usize) {
    transform(data, width, height, rustfft::FftDirection::Inverse);
    let scale = 1.0 / (width * height) as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

fn transform(
    data: &mut [Complex64],
    width: usize,
    height: usize,
    direction: rustfft::FftDirection,
) {
    assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(width, direction);
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(height, direction);
    let mut column = vec![Complex64::default(); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// Signed frequency index of bin `i` in an `n`-point transform
/// (`0, 1, .., n/2, -(n/2 - 1), .., -1` for even `n`).
pub fn freq_index(i: usize, n: usize) -> isize {
    if i < n.div_ceil(2) {
        i as isize
    } else {
        i as isize - n as isize
    }
}
