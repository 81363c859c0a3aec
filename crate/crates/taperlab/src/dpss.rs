//! Discrete prolate spheroidal sequences (Slepian tapers) and their
//! spectral concentration eigenvalues.
//!
//! A DPSS of length `n` for normalized half-bandwidth `W~ = W * dt` is an
//! eigenvector of the symmetric sinc kernel
//!
//! ```text
//! A[g, r] = sin(2 pi (g - r) W~) / (pi (g - r)),    A[g, g] = 2 W~,
//! ```
//!
//! whose eigenvalue is the fraction of the taper's spectral energy inside
//! `|f| <= W`. The dense kernel is badly conditioned for the clustered top
//! eigenvalues at large `n`, so production uses Slepian's commuting
//! symmetric tridiagonal operator: its eigenvectors are the same sequences
//! but with well-separated eigenvalues, computed here by Sturm bisection
//! plus inverse iteration. Concentration eigenvalues are then recovered as
//! Rayleigh quotients against the dense kernel applied by direct summation
//! (the tridiagonal eigenvalues themselves are not concentration ratios).
//!
//! Each taper is normalized to unit energy and scaled so its first nonzero
//! element is positive, making repeated computations bit-identical.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Optimal taper count `floor(2 t_HB) - 1`, saturating at zero when the
/// time-half-bandwidth product is too small to concentrate even one taper.
pub fn w_opt(t_hb: f64) -> usize {
    let w = (2.0 * t_hb).floor() - 1.0;
    if w < 1.0 {
        0
    } else {
        w as usize
    }
}

/// Segment length, half-bandwidth, and sample interval for one taper family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaperSpec {
    n: usize,
    w_hz: f64,
    dt_s: f64,
    t_hb: f64,
}

impl TaperSpec {
    /// Builds a spec from an explicit half-bandwidth `W`.
    pub fn new(n: usize, dt_s: f64, w_hz: f64) -> Result<Self> {
        if n == 0 || dt_s <= 0.0 {
            return Err(Error::Parameter(format!(
                "need n >= 1 and dt > 0, got n={n}, dt={dt_s}"
            )));
        }
        Self::validate(n, dt_s, w_hz, n as f64 * dt_s * w_hz)
    }

    /// Builds a spec from the time-half-bandwidth product, deriving
    /// `W = t_HB / (n dt)`.
    pub fn from_t_hb(n: usize, dt_s: f64, t_hb: f64) -> Result<Self> {
        if n == 0 || dt_s <= 0.0 {
            return Err(Error::Parameter(format!(
                "need n >= 1 and dt > 0, got n={n}, dt={dt_s}"
            )));
        }
        Self::validate(n, dt_s, t_hb / (n as f64 * dt_s), t_hb)
    }

    fn validate(n: usize, dt_s: f64, w_hz: f64, t_hb: f64) -> Result<Self> {
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(Error::Parameter(format!(
                "sample interval must be positive, got {dt_s}"
            )));
        }
        if !(w_hz > 0.0 && w_hz.is_finite()) {
            return Err(Error::Parameter(format!(
                "half-bandwidth must be positive, got {w_hz}"
            )));
        }
        if w_hz >= 0.5 / dt_s {
            return Err(Error::Parameter(format!(
                "half-bandwidth {w_hz} Hz must stay below half the sample rate {}",
                0.5 / dt_s
            )));
        }
        if t_hb >= n as f64 / 2.0 {
            return Err(Error::Parameter(format!(
                "time-half-bandwidth product {t_hb} must stay below n/2 = {}",
                n as f64 / 2.0
            )));
        }
        if w_opt(t_hb) < 1 {
            return Err(Error::Parameter(format!(
                "time-half-bandwidth product {t_hb} concentrates no taper (w_opt < 1)"
            )));
        }
        Ok(Self { n, w_hz, dt_s, t_hb })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w_hz(&self) -> f64 {
        self.w_hz
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn t_hb(&self) -> f64 {
        self.t_hb
    }

    /// Normalized half-bandwidth `W~ = W dt` in cycles per sample.
    pub fn w_norm(&self) -> f64 {
        self.w_hz * self.dt_s
    }

    pub fn num_tapers(&self) -> usize {
        w_opt(self.t_hb)
    }
}

/// The taper family for one spec: `w_opt` unit-energy sequences of length
/// `n` with strictly descending concentration eigenvalues in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TaperBasis {
    spec: TaperSpec,
    tapers: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl TaperBasis {
    pub fn spec(&self) -> &TaperSpec {
        &self.spec
    }

    pub fn num_tapers(&self) -> usize {
        self.tapers.len()
    }

    pub fn taper(&self, order: usize) -> &[f64] {
        &self.tapers[order]
    }

    pub fn tapers(&self) -> &[Vec<f64>] {
        &self.tapers
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Convex combination weights `lambda_w / sum(lambda)`.
    pub fn weights(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    /// The single effective window `sum_w weight_w * taper_w`. Because the
    /// DFT is linear, multiplying a segment by this window and transforming
    /// once equals the weighted sum of the per-taper transforms.
    pub fn effective_window(&self) -> Vec<f64> {
        let weights = self.weights();
        let mut h = vec![0.0; self.spec.n()];
        for (taper, w) in self.tapers.iter().zip(weights) {
            for (hv, tv) in h.iter_mut().zip(taper) {
                *hv += w * tv;
            }
        }
        h
    }
}

/// Computes the top `w_opt` eigenpairs for the spec.
pub fn dpss_basis(spec: &TaperSpec) -> Result<TaperBasis> {
    let count = spec.num_tapers();
    let (tapers, eigenvalues) = dpss_tapers(spec.n(), spec.w_norm(), count)?;
    Ok(TaperBasis { spec: *spec, tapers, eigenvalues })
}

/// Lower-level entry point: the `count` most concentrated sequences of
/// length `n` for normalized half-bandwidth `w_norm`, with their
/// concentration eigenvalues in descending order.
pub fn dpss_tapers(n: usize, w_norm: f64, count: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Parameter("segment length must be at least 1".into()));
    }
    if !(w_norm > 0.0 && w_norm < 0.5) {
        return Err(Error::Parameter(format!(
            "normalized half-bandwidth must lie in (0, 0.5), got {w_norm}"
        )));
    }
    if count < 1 || count > n {
        return Err(Error::Parameter(format!(
            "taper count must lie in [1, n={n}], got {count}"
        )));
    }
    if n == 1 {
        // The 1x1 kernel is the scalar 2 W~.
        return Ok((vec![vec![1.0]], vec![2.0 * w_norm]));
    }

    let (diag, offdiag) = commuting_tridiagonal(n, w_norm);
    let mut tapers: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut tri_eigs: Vec<f64> = Vec::with_capacity(count);
    for order in 0..count {
        // DPSS order 0 pairs with the largest tridiagonal eigenvalue.
        let ascending_index = n - 1 - order;
        let tri_eig = tridiag_eigenvalue(&diag, &offdiag, ascending_index);
        let mut v = inverse_iteration(&diag, &offdiag, tri_eig)?;
        reorthogonalize(&mut v, &tapers, &tri_eigs, tri_eig, &diag);
        fix_sign(&mut v);
        let lambda = concentration_rayleigh(&v, w_norm);
        tapers.push(v);
        eigenvalues.push(lambda);
        tri_eigs.push(tri_eig);
    }

    for pair in eigenvalues.windows(2) {
        // NaN-rejecting: anything but a strict descent is a failure.
        if pair[1].partial_cmp(&pair[0]) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Numeric(format!(
                "concentration eigenvalues not strictly descending: {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if eigenvalues.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(Error::Numeric(format!(
            "concentration eigenvalues left (0, 1): {eigenvalues:?}"
        )));
    }
    Ok((tapers, eigenvalues))
}

/// Entry at lag `(g - r)` of the sinc kernel.
pub fn kernel_value(lag: i64, w_norm: f64) -> f64 {
    if lag == 0 {
        2.0 * w_norm
    } else {
        let m = lag as f64;
        (2.0 * PI * m * w_norm).sin() / (PI * m)
    }
}

/// Dense n x n sinc kernel, row-major. Used for Rayleigh quotients in
/// production and as the matrix the test oracle decomposes.
pub fn concentration_kernel(n: usize, w_norm: f64) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for g in 0..n {
        for r in 0..n {
            a[g * n + r] = kernel_value(g as i64 - r as i64, w_norm);
        }
    }
    a
}

/// Rayleigh quotient of a unit vector against the sinc kernel, applied by
/// direct summation over Toeplitz lags.
fn concentration_rayleigh(v: &[f64], w_norm: f64) -> f64 {
    let n = v.len();
    let lags: Vec<f64> = (0..n).map(|m| kernel_value(m as i64, w_norm)).collect();
    let mut quad = 0.0;
    for g in 0..n {
        let mut acc = 0.0;
        for r in 0..n {
            acc += lags[g.abs_diff(r)] * v[r];
        }
        quad += v[g] * acc;
    }
    quad
}

/// Slepian's commuting operator: diagonal `((n-1)/2 - i)^2 cos(2 pi W~)`,
/// off-diagonal `(i+1)(n-1-i)/2`.
fn commuting_tridiagonal(n: usize, w_norm: f64) -> (Vec<f64>, Vec<f64>) {
    let c = (2.0 * PI * w_norm).cos();
    let half = (n as f64 - 1.0) / 2.0;
    let diag = (0..n).map(|i| c * (half - i as f64).powi(2)).collect();
    let offdiag = (0..n - 1)
        .map(|i| ((i + 1) as f64 * (n - 1 - i) as f64) / 2.0)
        .collect();
    (diag, offdiag)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`,
/// via the Sturm sequence of the shifted LDL^T recurrence.
fn sturm_count_below(diag: &[f64], offdiag: &[f64], x: f64) -> usize {
    const PIVMIN: f64 = 1e-290;
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < PIVMIN {
        q = -PIVMIN;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - offdiag[i - 1] * offdiag[i - 1] / q;
        if q.abs() < PIVMIN {
            q = -PIVMIN;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bisection for the eigenvalue with the given ascending index.
fn tridiag_eigenvalue(diag: &[f64], offdiag: &[f64], ascending_index: usize) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let left = if i > 0 { offdiag[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { offdiag[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, d) in diag.iter().enumerate() {
        lo = lo.min(d - radius(i));
        hi = hi.max(d + radius(i));
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if sturm_count_below(diag, offdiag, mid) > ascending_index {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift I) x = b` for tridiagonal `T` with partial pivoting.
fn solve_shifted(diag: &[f64], offdiag: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut dd: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut dl: Vec<f64> = offdiag.to_vec();
    let mut du: Vec<f64> = offdiag.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    let tiny = f64::EPSILON * diag.iter().fold(1.0f64, |m, d| m.max(d.abs()));

    for i in 0..n - 1 {
        if dd[i].abs() >= dl[i].abs() {
            if dd[i] == 0.0 {
                dd[i] = tiny;
            }
            let fact = dl[i] / dd[i];
            dl[i] = fact;
            dd[i + 1] -= fact * du[i];
        } else {
            let fact = dd[i] / dl[i];
            dd[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = temp - fact * dd[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swapped[i] = true;
        }
    }
    if dd[n - 1] == 0.0 {
        dd[n - 1] = tiny;
    }

    let mut x = b.to_vec();
    for i in 0..n - 1 {
        if swapped[i] {
            x.swap(i, i + 1);
        }
        let xi = x[i];
        x[i + 1] -= dl[i] * xi;
    }
    x[n - 1] /= dd[n - 1];
    if n >= 2 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dd[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dd[i];
    }
    x
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn tridiag_apply(diag: &[f64], offdiag: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = diag[i] * v[i];
            if i > 0 {
                acc += offdiag[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += offdiag[i] * v[i + 1];
            }
            acc
        })
        .collect()
}

/// Inverse iteration at the bisected shift; the shift is accurate to a few
/// ulps so two or three solves normally converge.
fn inverse_iteration(diag: &[f64], offdiag: &[f64], eig: f64) -> Result<Vec<f64>> {
    let n = diag.len();
    let scale = diag.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    // Deterministic start vector with no special symmetry.
    let mut v: Vec<f64> = (0..n).map(|i| (0.7 + (i as f64) * 1.9).sin()).collect();
    normalize(&mut v);

    let residual_of = |v: &[f64]| -> f64 {
        tridiag_apply(diag, offdiag, v)
            .iter()
            .zip(v)
            .map(|(av, vi)| (av - eig * vi).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    for _ in 0..10 {
        let mut next = solve_shifted(diag, offdiag, eig, &v);
        let growth = normalize(&mut next);
        if !growth.is_finite() || growth == 0.0 {
            break;
        }
        v = next;
        if residual_of(&v) <= 1e-13 * scale {
            break;
        }
    }

    let residual = residual_of(&v);
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::Numeric(format!(
            "inverse iteration failed to converge (residual {residual:e})"
        )));
    }
    Ok(v)
}

/// Gram-Schmidt against earlier vectors whose tridiagonal eigenvalues sit
/// close enough to interact numerically. The commuting operator's top
/// eigenvalues are widely separated, so this rarely fires.
fn reorthogonalize(
    v: &mut [f64],
    previous: &[Vec<f64>],
    prev_eigs: &[f64],
    eig: f64,
    diag: &[f64],
) {
    let scale = diag.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let mut touched = false;
    for (p, pe) in previous.iter().zip(prev_eigs) {
        if (pe - eig).abs() <= 1e-10 * scale {
            let dot: f64 = v.iter().zip(p).map(|(a, b)| a * b).sum();
            for (vi, pi) in v.iter_mut().zip(p) {
                *vi -= dot * pi;
            }
            touched = true;
        }
    }
    if touched {
        normalize(v);
    }
}

/// Scales the vector so its first nonzero element is positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}
