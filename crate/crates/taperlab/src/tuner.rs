//! Exhaustive setup-parameter search over (n, s): evaluates the corrected
//! pattern for every design on a grid, scores it against a reference
//! pattern with a least-squares-scaled residual, keeps the locally optimal
//! designs, and averages the best quantile of them into the final result.

use std::collections::HashMap;

use serde::Serialize;

use crate::dpss::{dpss_basis, TaperBasis, TaperSpec};
use crate::error::{Error, Result};
use crate::multitaper::{correct_from_time, derived_dt, plan_segments, to_time_domain};
use crate::parallel::par_map;
use crate::sweep::{Pattern, SweepSet};

/// Residual form used for the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Squared l2 residual `||c - alpha r||^2`.
    #[default]
    SquaredResidual,
    /// Plain signed sum `sum(c - alpha r)`, kept for comparison.
    SignedSum,
}

/// Space in which the scale fit and residual are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitSpace {
    #[default]
    Linear,
    /// 20 log10 of the values, floored at -240 dB.
    Decibel,
}

const DB_FLOOR_LINEAR: f64 = 1e-12;

/// Search grid: the designs are the cross product of segment lengths and
/// step fractions, with `s = round(q * n)` clamped into `[1, n]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchGrid {
    n_values: Vec<usize>,
    q_values: Vec<f64>,
}

impl Default for SearchGrid {
    /// n in {101, 151, .., 901} and q in {0.1, .., 0.9}: 153 designs
    /// spanning the documented search bounds.
    fn default() -> Self {
        let n_values = (0..17).map(|i| 101 + 50 * i).collect();
        let q_values = (1..=9).map(|i| i as f64 / 10.0).collect();
        Self { n_values, q_values }
    }
}

impl SearchGrid {
    /// Grid axes are canonicalized (sorted, deduplicated) so permuted
    /// inputs tune identically.
    pub fn new(n_values: Vec<usize>, q_values: Vec<f64>) -> Result<Self> {
        if n_values.is_empty() || q_values.is_empty() {
            return Err(Error::Parameter("search grid must not be empty".into()));
        }
        if n_values.iter().any(|n| *n < 2) {
            return Err(Error::Parameter("segment lengths must be at least 2".into()));
        }
        if q_values.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(Error::Parameter("step fractions must lie in (0, 1]".into()));
        }
        let mut n_values = n_values;
        n_values.sort_unstable();
        n_values.dedup();
        let mut q_values = q_values;
        q_values.sort_by(f64::total_cmp);
        q_values.dedup();
        Ok(Self { n_values, q_values })
    }

    pub fn n_values(&self) -> &[usize] {
        &self.n_values
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q_values
    }

    pub fn len(&self) -> usize {
        self.n_values.len() * self.q_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty() || self.q_values.is_empty()
    }

    fn step_for(n: usize, q: f64) -> usize {
        ((q * n as f64).round() as usize).clamp(1, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Design {
    pub n: usize,
    pub s: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunerOptions {
    pub t_hb: f64,
    pub sigma: f64,
    pub grid: SearchGrid,
    pub objective: ObjectiveKind,
    pub fit_space: FitSpace,
}

impl Default for TunerOptions {
    fn default() -> Self {
        Self {
            t_hb: 4.0,
            sigma: 0.1,
            grid: SearchGrid::default(),
            objective: ObjectiveKind::default(),
            fit_space: FitSpace::default(),
        }
    }
}

/// Least-squares scale `alpha = <r, c> / <r, r>` minimizing
/// `||c - alpha r||`.
pub fn alpha_fit(candidate: &Pattern, reference: &Pattern) -> Result<f64> {
    alpha_fit_values(candidate, reference, FitSpace::Linear)
}

fn fit_vectors(candidate: &Pattern, reference: &Pattern, space: FitSpace) -> Result<(Vec<f64>, Vec<f64>)> {
    if !candidate.angles().approx_same(reference.angles()) {
        return Err(Error::Parameter(
            "candidate and reference patterns use different angle grids".into(),
        ));
    }
    let map = |v: &f64| match space {
        FitSpace::Linear => *v,
        FitSpace::Decibel => 20.0 * v.max(DB_FLOOR_LINEAR).log10(),
    };
    Ok((
        candidate.values().iter().map(map).collect(),
        reference.values().iter().map(map).collect(),
    ))
}

fn alpha_fit_values(candidate: &Pattern, reference: &Pattern, space: FitSpace) -> Result<f64> {
    let (c, r) = fit_vectors(candidate, reference, space)?;
    let rr: f64 = r.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return Err(Error::Parameter("reference pattern is identically zero".into()));
    }
    let rc: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
    Ok(rc / rr)
}

/// Objective with the default squared-residual form in linear space.
pub fn objective(candidate: &Pattern, reference: &Pattern) -> Result<f64> {
    objective_with(candidate, reference, ObjectiveKind::SquaredResidual, FitSpace::Linear)
}

pub fn objective_with(
    candidate: &Pattern,
    reference: &Pattern,
    kind: ObjectiveKind,
    space: FitSpace,
) -> Result<f64> {
    let (c, r) = fit_vectors(candidate, reference, space)?;
    let rr: f64 = r.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return Err(Error::Parameter("reference pattern is identically zero".into()));
    }
    let rc: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
    let alpha = rc / rr;
    let value: f64 = match kind {
        ObjectiveKind::SquaredResidual => {
            c.iter().zip(&r).map(|(cv, rv)| (cv - alpha * rv).powi(2)).sum()
        }
        ObjectiveKind::SignedSum => c.iter().zip(&r).map(|(cv, rv)| cv - alpha * rv).sum(),
    };
    if !value.is_finite() {
        return Err(Error::Numeric("objective evaluated to a non-finite value".into()));
    }
    Ok(value)
}

/// One grid cell in the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub n: usize,
    pub s: usize,
    /// Objective value; absent when the design was excluded.
    pub u: Option<f64>,
    /// Corrected pattern; absent when the design was excluded.
    pub pattern: Option<Pattern>,
    pub locally_optimal: bool,
    pub selected: bool,
    /// Why the design produced no value (centre bin not covered).
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub t_hb: f64,
    pub sigma: f64,
    /// Every grid design in (n, s) order.
    pub designs: Vec<DesignReport>,
    /// Indices into `designs` of the locally optimal subset, ranked by
    /// ascending objective (ties broken by n then s).
    pub locally_optimal: Vec<usize>,
    /// Indices of the averaged quantile, a prefix of `locally_optimal`.
    pub selected: Vec<usize>,
    /// Mean of the selected corrected patterns.
    pub result: Pattern,
}

/// Number of designs averaged for a quantile `sigma` of `count` locally
/// optimal designs: `max(1, ceil(sigma * count))`.
pub fn quantile_count(sigma: f64, count: usize) -> usize {
    ((sigma * count as f64).ceil() as usize).max(1)
}

/// Evaluates every design, ranks local optima by domination against the
/// up-to-8 grid neighbours, and averages the best `sigma` quantile.
pub fn tune(sweep: &SweepSet, reference: &Pattern, opts: &TunerOptions) -> Result<TuneReport> {
    if !(opts.sigma > 0.0 && opts.sigma <= 1.0) {
        return Err(Error::Parameter(format!("sigma must lie in (0, 1], got {}", opts.sigma)));
    }
    if !reference.angles().approx_same(sweep.angles()) {
        return Err(Error::Parameter(
            "reference pattern angle grid does not match the sweep".into(),
        ));
    }
    if reference.peak() == 0.0 {
        return Err(Error::Parameter("reference pattern is identically zero".into()));
    }
    let freq = *sweep.freq();
    let n_fft = crate::multitaper::derived_fft_len(freq.len());
    let dt = derived_dt(&freq);
    for &n in opts.grid.n_values() {
        if n > n_fft / 2 {
            return Err(Error::Parameter(format!(
                "grid segment length {n} exceeds N/2 = {} for this sweep",
                n_fft / 2
            )));
        }
    }

    // Shared across designs: one time response per angle, one taper basis
    // per segment length.
    let columns: Vec<Vec<num_complex::Complex64>> =
        (0..sweep.angles().len()).map(|a| sweep.column(a)).collect();
    let times = {
        let freq_copy = freq;
        par_map(columns, move |col| to_time_domain(&col, &freq_copy))
    };
    let mut time_responses = Vec::with_capacity(times.len());
    for t in times {
        time_responses.push(t?);
    }
    let mut bases: HashMap<usize, TaperBasis> = HashMap::new();
    for &n in opts.grid.n_values() {
        let spec = TaperSpec::from_t_hb(n, dt, opts.t_hb)?;
        bases.insert(n, dpss_basis(&spec)?);
    }

    // Canonical design enumeration: n ascending then s ascending (q is
    // sorted, and s grows with q), so reports are independent of the
    // caller's axis order.
    let nq = opts.grid.q_values().len();
    let designs: Vec<Design> = opts
        .grid
        .n_values()
        .iter()
        .flat_map(|&n| {
            opts.grid
                .q_values()
                .iter()
                .map(move |&q| Design { n, s: SearchGrid::step_for(n, q) })
        })
        .collect();

    struct Eval {
        design: Design,
        outcome: Result<(Pattern, f64)>,
    }

    let reference_clone = reference.clone();
    let objective_kind = opts.objective;
    let fit_space = opts.fit_space;
    let evals: Vec<Eval> = {
        let time_responses = &time_responses;
        let bases = &bases;
        let reference = &reference_clone;
        let angles = sweep.angles().clone();
        let f0 = freq.f0_hz();
        let dw = freq.spacing_hz();
        par_map(designs, move |design| {
            let basis = &bases[&design.n];
            let outcome = (|| {
                let plan = plan_segments(n_fft, design.n, design.s)?;
                let mut values = Vec::with_capacity(time_responses.len());
                for time in time_responses.iter() {
                    values.push(correct_from_time(time, &plan, basis, dw)?);
                }
                let pattern = Pattern::new(angles.clone(), values, f0)?;
                let u = objective_with(&pattern, reference, objective_kind, fit_space)?;
                Ok((pattern, u))
            })();
            Eval { design, outcome }
        })
    };

    let mut reports: Vec<DesignReport> = Vec::with_capacity(evals.len());
    for eval in evals {
        match eval.outcome {
            Ok((pattern, u)) => reports.push(DesignReport {
                n: eval.design.n,
                s: eval.design.s,
                u: Some(u),
                pattern: Some(pattern),
                locally_optimal: false,
                selected: false,
                excluded: None,
            }),
            Err(Error::Coverage { n, s }) => reports.push(DesignReport {
                n,
                s,
                u: None,
                pattern: None,
                locally_optimal: false,
                selected: false,
                excluded: Some("centre-frequency bin not covered".into()),
            }),
            Err(other) => return Err(other),
        }
    }
    if reports.iter().all(|r| r.u.is_none()) {
        return Err(Error::Tune("every design failed centre-bin coverage".into()));
    }

    // Discrete local optimum: U(x) <= U(y) for every evaluated grid
    // neighbour y (+-1 in the n and q axes, diagonals included).
    let n_count = opts.grid.n_values().len();
    let at = |ni: usize, qi: usize| -> &DesignReport { &reports[ni * nq + qi] };
    let mut local_flags = vec![false; reports.len()];
    for ni in 0..n_count {
        for qi in 0..nq {
            let here = at(ni, qi);
            let Some(u_here) = here.u else { continue };
            let mut dominated = false;
            for dn in -1i64..=1 {
                for dq in -1i64..=1 {
                    if dn == 0 && dq == 0 {
                        continue;
                    }
                    let (nn, qq) = (ni as i64 + dn, qi as i64 + dq);
                    if nn < 0 || qq < 0 || nn >= n_count as i64 || qq >= nq as i64 {
                        continue;
                    }
                    if let Some(u_other) = at(nn as usize, qq as usize).u {
                        if u_other < u_here {
                            dominated = true;
                        }
                    }
                }
            }
            local_flags[ni * nq + qi] = !dominated;
        }
    }
    for (r, flag) in reports.iter_mut().zip(&local_flags) {
        r.locally_optimal = *flag;
    }

    // Rank local optima by (U, n, s); ties keep the smaller design first.
    let mut optima: Vec<usize> = (0..reports.len()).filter(|&i| reports[i].locally_optimal).collect();
    optima.sort_by(|&a, &b| {
        let (ra, rb) = (&reports[a], &reports[b]);
        ra.u
            .unwrap()
            .total_cmp(&rb.u.unwrap())
            .then(ra.n.cmp(&rb.n))
            .then(ra.s.cmp(&rb.s))
    });
    let take = quantile_count(opts.sigma, optima.len()).min(optima.len());
    let selected: Vec<usize> = optima[..take].to_vec();
    for &i in &selected {
        reports[i].selected = true;
    }

    let selected_patterns: Vec<&Pattern> =
        selected.iter().map(|&i| reports[i].pattern.as_ref().unwrap()).collect();
    let result = Pattern::mean(&selected_patterns)?;

    Ok(TuneReport {
        t_hb: opts.t_hb,
        sigma: opts.sigma,
        designs: reports,
        locally_optimal: optima,
        selected,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{AngleGrid, FrequencyGrid};
    use num_complex::Complex64;

    fn pattern(values: Vec<f64>) -> Pattern {
        let angles = AngleGrid::uniform(0.0, 10.0, values.len()).unwrap();
        Pattern::new(angles, values, 4e9).unwrap()
    }

    #[test]
    fn default_grid_has_153_designs_in_bounds() {
        let grid = SearchGrid::default();
        assert_eq!(grid.len(), 153);
        assert_eq!(grid.n_values().first(), Some(&101));
        assert_eq!(grid.n_values().last(), Some(&901));
        for &n in grid.n_values() {
            for &q in grid.q_values() {
                let s = SearchGrid::step_for(n, q);
                assert!(s >= 1 && s <= n);
            }
        }
    }

    #[test]
    fn alpha_recovers_exact_scales() {
        let r = pattern(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(alpha_fit(&r, &r).unwrap(), 1.0);
        let c2 = pattern(vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(alpha_fit(&c2, &r).unwrap(), 2.0);
        // Orthogonal candidate projects to zero.
        let r = pattern(vec![1.0, 0.0, 1.0, 0.0]);
        let c = pattern(vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(alpha_fit(&c, &r).unwrap(), 0.0);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let r = pattern(vec![0.0, 0.0, 0.0]);
        let c = pattern(vec![1.0, 2.0, 3.0]);
        assert!(alpha_fit(&c, &r).is_err());
        assert!(objective(&c, &r).is_err());
    }

    #[test]
    fn objective_examples() {
        let r = pattern(vec![1.0, 2.0, 3.0, 4.0]);
        let c3 = pattern(vec![3.0, 6.0, 9.0, 12.0]);
        assert!(objective(&c3, &r).unwrap().abs() < 1e-12);
        // Orthogonal candidate keeps its own energy.
        let r = pattern(vec![1.0, 0.0, 1.0, 0.0]);
        let c = pattern(vec![0.0, 2.0, 0.0, 2.0]);
        assert_eq!(objective(&c, &r).unwrap(), 8.0);
    }

    #[test]
    fn objective_matches_scan_oracle() {
        // Fixed 8-angle pair; the oracle scans alpha in [-10, 10] with step
        // 1e-5 evaluating the full residual each time.
        let c = pattern(vec![0.82, 0.11, 0.34, 0.96, 0.45, 0.07, 0.63, 0.28]);
        let r = pattern(vec![0.50, 0.23, 0.81, 0.67, 0.12, 0.39, 0.92, 0.05]);
        let got = objective(&c, &r).unwrap();
        let mut best = f64::INFINITY;
        let steps = 2_000_000i64;
        for i in 0..=steps {
            let alpha = -10.0 + i as f64 * 1e-5;
            let res: f64 = c
                .values()
                .iter()
                .zip(r.values())
                .map(|(cv, rv)| (cv - alpha * rv).powi(2))
                .sum();
            if res < best {
                best = res;
            }
        }
        assert!((got - best).abs() <= 1e-6 * best, "{got} vs scan {best}");
    }

    #[test]
    fn quantile_counts() {
        assert_eq!(quantile_count(0.1, 50), 5);
        assert_eq!(quantile_count(1.0, 7), 7);
        assert_eq!(quantile_count(1e-9, 7), 1);
        assert_eq!(quantile_count(0.1, 1), 1);
    }

    fn small_sweep(seed_phase: f64) -> (SweepSet, Pattern) {
        let freq = FrequencyGrid::new(3.0e9, 5.0e9, 17).unwrap();
        let angles = AngleGrid::uniform(0.0, 30.0, 8).unwrap();
        let truth: Vec<f64> =
            (0..8).map(|a| 0.2 + (a as f64 * 0.4 + seed_phase).sin().abs()).collect();
        let mut data = vec![Complex64::new(0.0, 0.0); 17 * 8];
        for k in 0..17 {
            for a in 0..8 {
                let phase = -0.3 * k as f64;
                // Second path with its own angle profile so the corrected
                // pattern is not an exact multiple of the reference.
                let echo_amp = 0.1 + 0.05 * (a as f64 * 1.3).cos();
                data[k * 8 + a] = Complex64::from_polar(truth[a], phase)
                    + Complex64::from_polar(echo_amp, 1.7 * k as f64);
            }
        }
        let sweep = SweepSet::new(freq, angles.clone(), data).unwrap();
        let reference = Pattern::new(angles, truth, freq.f0_hz()).unwrap();
        (sweep, reference)
    }

    fn small_opts(grid: SearchGrid) -> TunerOptions {
        TunerOptions { t_hb: 3.0, sigma: 0.1, grid, ..TunerOptions::default() }
    }

    #[test]
    fn single_design_grid_selects_it() {
        let (sweep, reference) = small_sweep(0.0);
        let grid = SearchGrid::new(vec![32], vec![0.5]).unwrap();
        let report = tune(&sweep, &reference, &small_opts(grid)).unwrap();
        assert_eq!(report.designs.len(), 1);
        assert_eq!(report.locally_optimal, vec![0]);
        assert_eq!(report.selected, vec![0]);
        assert_eq!(&report.result, report.designs[0].pattern.as_ref().unwrap());
    }

    #[test]
    fn constant_landscape_marks_everything_optimal() {
        // A zero sweep corrects to zero patterns, so U = 0 everywhere.
        let freq = FrequencyGrid::new(3.0e9, 5.0e9, 17).unwrap();
        let angles = AngleGrid::uniform(0.0, 30.0, 8).unwrap();
        let sweep =
            SweepSet::new(freq, angles.clone(), vec![Complex64::new(0.0, 0.0); 17 * 8]).unwrap();
        let reference =
            Pattern::new(angles, vec![1.0, 0.4, 0.9, 0.2, 0.8, 0.1, 0.7, 0.3], freq.f0_hz())
                .unwrap();
        let grid = SearchGrid::new(vec![16, 24, 32], vec![0.25, 0.5, 0.75]).unwrap();
        let report = tune(&sweep, &reference, &small_opts(grid)).unwrap();
        assert_eq!(report.locally_optimal.len(), 9);
        // Tie order is (n, s) ascending.
        let first = &report.designs[report.locally_optimal[0]];
        assert_eq!((first.n, first.s), (16, 4));
        assert_eq!(report.selected.len(), quantile_count(0.1, 9));
        assert!(report.result.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn permuted_grid_axes_give_identical_reports() {
        let (sweep, reference) = small_sweep(0.3);
        let a = SearchGrid::new(vec![16, 32, 48], vec![0.2, 0.5, 0.8]).unwrap();
        let b = SearchGrid::new(vec![48, 16, 32], vec![0.8, 0.2, 0.5]).unwrap();
        let ra = tune(&sweep, &reference, &small_opts(a)).unwrap();
        let rb = tune(&sweep, &reference, &small_opts(b)).unwrap();
        assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
    }

    #[test]
    fn global_best_is_always_selected() {
        let (sweep, reference) = small_sweep(0.7);
        let grid = SearchGrid::new(vec![16, 24, 32, 48], vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let report = tune(&sweep, &reference, &small_opts(grid)).unwrap();
        let min_u = report
            .designs
            .iter()
            .filter_map(|d| d.u)
            .fold(f64::INFINITY, f64::min);
        let best_selected = report
            .selected
            .iter()
            .any(|&i| report.designs[i].u == Some(min_u));
        assert!(best_selected);
        // And sigma = 1 selects every local optimum.
        let opts = TunerOptions {
            sigma: 1.0,
            ..small_opts(SearchGrid::new(vec![16, 24, 32, 48], vec![0.2, 0.4, 0.6, 0.8]).unwrap())
        };
        let full = tune(&sweep, &reference, &opts).unwrap();
        assert_eq!(full.selected.len(), full.locally_optimal.len());
    }

    #[test]
    fn reference_rescaling_changes_nothing() {
        let (sweep, reference) = small_sweep(1.1);
        let grid = SearchGrid::new(vec![16, 32], vec![0.3, 0.6]).unwrap();
        let base = tune(&sweep, &reference, &small_opts(grid.clone())).unwrap();
        let scaled_ref = Pattern::new(
            reference.angles().clone(),
            reference.values().iter().map(|v| 7.7 * v).collect(),
            reference.f0_hz(),
        )
        .unwrap();
        let scaled = tune(&sweep, &scaled_ref, &small_opts(grid)).unwrap();
        assert_eq!(base.locally_optimal, scaled.locally_optimal);
        assert_eq!(base.selected, scaled.selected);
        for (a, b) in base.designs.iter().zip(&scaled.designs) {
            let (ua, ub) = (a.u.unwrap(), b.u.unwrap());
            assert!((ua - ub).abs() <= 1e-9 * ua.abs().max(1e-300), "{ua} vs {ub}");
        }
        for (a, b) in base.result.values().iter().zip(scaled.result.values()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn oversized_segment_length_is_rejected() {
        let (sweep, reference) = small_sweep(0.0);
        // K=17 gives N=256, so n must stay <= 128.
        let grid = SearchGrid::new(vec![200], vec![0.5]).unwrap();
        assert!(tune(&sweep, &reference, &small_opts(grid)).is_err());
    }
}
