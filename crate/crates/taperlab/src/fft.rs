//! Shared FFT plumbing: a process-wide plan cache and centring shifts.
//!
//! Convention used throughout the crate: the forward transform is unscaled
//! and the inverse is scaled by 1/N, so `forward(inverse(x)) == x` up to
//! rounding.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().unwrap().plan_fft_forward(len)
}

pub fn inverse_plan(len: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().unwrap().plan_fft_inverse(len)
}

/// In-place forward DFT, unscaled.
pub fn forward(buf: &mut [Complex64]) {
    forward_plan(buf.len()).process(buf);
}

/// In-place inverse DFT, scaled by 1/N.
pub fn inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    inverse_plan(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Reorders a DFT-ordered buffer to centred order.
///
/// Output index `j` holds input index `(j + ceil(n/2)) mod n`, so the DC bin
/// (input index 0) lands at output index `floor(n/2)` and the centred index
/// axis is `[-floor(n/2) .. n-1-floor(n/2)]`.
pub fn fftshift(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let split = n - n / 2;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&x[split..]);
    out.extend_from_slice(&x[..split]);
    out
}

/// Inverse of [`fftshift`]: centred order back to DFT order.
pub fn ifftshift(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let split = n / 2;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&x[split..]);
    out.extend_from_slice(&x[..split]);
    out
}
