//! Pattern fidelity metrics, method comparison reports, and plot-data
//! export.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gating::{gated_pattern, GateSpec};
use crate::sweep::{Pattern, SweepSet};
use crate::tuner::{tune, TunerOptions};

/// Everything below this is reported as the floor; keeps a perfect match
/// from producing -inf dB.
pub const E_R_FLOOR_DB: f64 = -100.0;

/// Root-mean-square error in dB of a residual vector whose inputs are
/// already normalized: `20 log10(sqrt(mean(residual^2)))`, floored.
pub fn rms_db(residual: &[f64]) -> f64 {
    let ms: f64 = residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64;
    let db = 20.0 * ms.sqrt().log10();
    db.max(E_R_FLOOR_DB)
}

/// Pattern error: both patterns are peak-normalized to 1 and the RMS of
/// their difference is expressed in dB.
pub fn e_r(candidate: &Pattern, reference: &Pattern) -> Result<f64> {
    if !candidate.angles().approx_same(reference.angles()) {
        return Err(Error::Parameter(
            "candidate and reference patterns use different angle grids".into(),
        ));
    }
    let cp = candidate.peak();
    let rp = reference.peak();
    if cp <= 0.0 || rp <= 0.0 {
        return Err(Error::Parameter("patterns must have a positive peak".into()));
    }
    let residual: Vec<f64> = candidate
        .values()
        .iter()
        .zip(reference.values())
        .map(|(c, r)| c / cp - r / rp)
        .collect();
    Ok(rms_db(&residual))
}

/// Absolute improvement between two error figures.
pub fn delta_db(e_r_corrected: f64, e_r_uncorrected: f64) -> f64 {
    (e_r_corrected - e_r_uncorrected).abs()
}

/// The plain band-centre magnitude per angle, with no correction applied.
pub fn uncorrected_pattern(sweep: &SweepSet) -> Result<Pattern> {
    let k0 = sweep.freq().center_bin();
    let values = (0..sweep.angles().len()).map(|a| sweep.value(k0, a).norm()).collect();
    Pattern::new(sweep.angles().clone(), values, sweep.freq().f0_hz())
}

/// Gate configurations for one comparison case; any `None` method is
/// reported as absent.
#[derive(Debug, Clone, Default)]
pub struct GateSet {
    pub rectangular: Option<GateSpec>,
    pub hann: Option<GateSpec>,
    pub composite: Option<GateSpec>,
}

/// One dataset (one centre frequency) to compare methods on.
#[derive(Debug, Clone)]
pub struct CompareCase {
    pub sweep: SweepSet,
    pub reference: Pattern,
    pub gates: GateSet,
}

/// Per-frequency scores; a method that failed or was not configured is
/// absent rather than fatal.
#[derive(Debug, Clone, Serialize)]
pub struct CaseScores {
    pub f0_hz: f64,
    pub e_r_uncorrected_db: f64,
    pub e_r_rectangular_db: Option<f64>,
    pub e_r_hann_db: Option<f64>,
    pub e_r_composite_db: Option<f64>,
    pub e_r_multitaper_db: Option<f64>,
    /// `|e_R(corrected) - e_R(uncorrected)|` for the multitaper result.
    pub delta_db: Option<f64>,
    /// Human-readable notes for failed methods.
    pub notes: Vec<String>,
}

/// Frequency-averaged scores per method, over the cases where the method
/// produced a value.
#[derive(Debug, Clone, Serialize)]
pub struct MethodAverages {
    pub e_r_uncorrected_db: f64,
    pub e_r_rectangular_db: Option<f64>,
    pub e_r_hann_db: Option<f64>,
    pub e_r_composite_db: Option<f64>,
    pub e_r_multitaper_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub per_f0: Vec<CaseScores>,
    pub averaged: MethodAverages,
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

/// Patterns produced while scoring one case, kept for plot emission.
#[derive(Debug, Clone)]
pub struct CasePatterns {
    pub uncorrected: Pattern,
    pub rectangular: Option<Pattern>,
    pub hann: Option<Pattern>,
    pub composite: Option<Pattern>,
    pub multitaper: Option<Pattern>,
}

/// Runs uncorrected extraction, the configured gating baselines, and the
/// tuned multitaper pipeline on every case.
pub fn compare(cases: &[CompareCase], tune_opts: &TunerOptions) -> Result<FidelityReport> {
    let mut per_f0 = Vec::with_capacity(cases.len());
    for case in cases {
        per_f0.push(compare_case(case, tune_opts)?.0);
    }
    aggregate(per_f0)
}

/// Combines per-case scores into the frequency-averaged report.
pub fn aggregate(per_f0: Vec<CaseScores>) -> Result<FidelityReport> {
    if per_f0.is_empty() {
        return Err(Error::Parameter("no comparison cases given".into()));
    }
    let averaged = MethodAverages {
        e_r_uncorrected_db: per_f0.iter().map(|c| c.e_r_uncorrected_db).sum::<f64>()
            / per_f0.len() as f64,
        e_r_rectangular_db: mean_present(per_f0.iter().map(|c| c.e_r_rectangular_db)),
        e_r_hann_db: mean_present(per_f0.iter().map(|c| c.e_r_hann_db)),
        e_r_composite_db: mean_present(per_f0.iter().map(|c| c.e_r_composite_db)),
        e_r_multitaper_db: mean_present(per_f0.iter().map(|c| c.e_r_multitaper_db)),
    };
    Ok(FidelityReport { per_f0, averaged })
}

/// Scores one case; a failed or unconfigured method is noted and skipped.
pub fn compare_case(
    case: &CompareCase,
    tune_opts: &TunerOptions,
) -> Result<(CaseScores, CasePatterns)> {
    let mut notes = Vec::new();
    let uncorrected = uncorrected_pattern(&case.sweep)?;
    let e_unc = e_r(&uncorrected, &case.reference)?;

    let gate_run = |label: &str, spec: &Option<GateSpec>, notes: &mut Vec<String>| match spec {
        None => None,
        Some(spec) => match gated_pattern(&case.sweep, spec)
            .and_then(|p| e_r(&p, &case.reference).map(|e| (p, e)))
        {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("{label} gate failed: {e}"));
                None
            }
        },
    };
    let rect = gate_run("rectangular", &case.gates.rectangular, &mut notes);
    let hann = gate_run("hann", &case.gates.hann, &mut notes);
    let comp = gate_run("composite", &case.gates.composite, &mut notes);

    let multi = match tune(&case.sweep, &case.reference, tune_opts)
        .and_then(|report| e_r(&report.result, &case.reference).map(|e| (report.result, e)))
    {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("multitaper tuning failed: {e}"));
            None
        }
    };

    let scores = CaseScores {
        f0_hz: case.sweep.freq().f0_hz(),
        e_r_uncorrected_db: e_unc,
        e_r_rectangular_db: rect.as_ref().map(|(_, e)| *e),
        e_r_hann_db: hann.as_ref().map(|(_, e)| *e),
        e_r_composite_db: comp.as_ref().map(|(_, e)| *e),
        e_r_multitaper_db: multi.as_ref().map(|(_, e)| *e),
        delta_db: multi.as_ref().map(|(_, e)| delta_db(*e, e_unc)),
        notes,
    };
    let patterns = CasePatterns {
        uncorrected,
        rectangular: rect.map(|(p, _)| p),
        hann: hann.map(|(p, _)| p),
        composite: comp.map(|(p, _)| p),
        multitaper: multi.map(|(p, _)| p),
    };
    Ok((scores, patterns))
}

/// Writes long-form plot rows `label,angle_deg,mag_db_normalized` with
/// each pattern peak-normalized to 0 dB (zeros floored at -100 dB).
pub fn emit_plot_data<W: Write>(patterns: &[(&str, &Pattern)], mut w: W) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io { path: "<plot data>".into(), source };
    writeln!(w, "label,angle_deg,mag_db_normalized").map_err(io_err)?;
    for (label, pattern) in patterns {
        let peak = pattern.peak();
        if peak <= 0.0 {
            return Err(Error::Parameter(format!(
                "pattern {label:?} has no positive peak to normalize to"
            )));
        }
        for (angle, value) in pattern.angles().values().iter().zip(pattern.values()) {
            let db = (20.0 * (value / peak).log10()).max(E_R_FLOOR_DB);
            writeln!(w, "{label},{angle},{db}").map_err(io_err)?;
        }
    }
    Ok(())
}
