//! Classical time-gating baselines operating on the same time responses
//! as the multitaper engine: a rectangular gate placed from a measured
//! antenna distance, a Hann gate centred on the impulse-response peak, and
//! a threshold-detected composite (Tukey) gate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multitaper::{to_frequency_band, to_time_domain, TimeResponse};
use crate::parallel::par_map;
use crate::sweep::{FrequencyGrid, Pattern, SweepSet};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Gate selection for pattern-level runs. `Hann` with `center_s: None`
/// picks the per-angle peak automatically; a manual centre overrides the
/// automation and applies one global gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateSpec {
    Rectangular { distance_m: f64, width_s: f64 },
    Hann { center_s: Option<f64>, width_s: f64 },
    ThresholdComposite { rel_start: f64, rel_stop: f64, taper_fraction: f64 },
}

fn check_width(time: &TimeResponse, width_s: f64) -> Result<()> {
    let span = time.len() as f64 * time.dt_s();
    if !(width_s > 0.0 && width_s <= span) {
        return Err(Error::Parameter(format!(
            "gate width {width_s} s must lie in (0, N*dt = {span} s]"
        )));
    }
    Ok(())
}

fn check_window_overlaps_axis(time: &TimeResponse, lo: f64, hi: f64) -> Result<()> {
    let t_min = time.time_at(0);
    let t_max = time.time_at(time.len() - 1);
    if hi < t_min || lo > t_max {
        return Err(Error::Parameter(format!(
            "gate [{lo} s, {hi} s] lies entirely outside the time axis [{t_min} s, {t_max} s]"
        )));
    }
    Ok(())
}

/// Zeroes all samples outside `[tau - width/2, tau + width/2]` where
/// `tau = distance / c`. The gate edges are rounded to the nearest sample,
/// so a full-span gate passes every sample through unchanged.
pub fn gate_rectangular(time: &TimeResponse, distance_m: f64, width_s: f64) -> Result<TimeResponse> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(Error::Parameter(format!("distance must be positive, got {distance_m}")));
    }
    check_width(time, width_s)?;
    let tau = distance_m / SPEED_OF_LIGHT_M_S;
    let (lo, hi) = (tau - width_s / 2.0, tau + width_s / 2.0);
    check_window_overlaps_axis(time, lo, hi)?;
    let t_min = time.time_at(0);
    let dt = time.dt_s();
    let last = time.len() as i64 - 1;
    let j_lo = (((lo - t_min) / dt).round() as i64).clamp(0, last) as usize;
    let j_hi = (((hi - t_min) / dt).round() as i64).clamp(0, last) as usize;
    let samples = time
        .samples()
        .iter()
        .enumerate()
        .map(|(j, v)| if j >= j_lo && j <= j_hi { *v } else { Complex64::new(0.0, 0.0) })
        .collect();
    Ok(time.with_samples(samples))
}

/// Multiplies by a Hann window supported on `[center - width/2,
/// center + width/2]`; `center` defaults to the peak-magnitude sample time
/// so benchmark runs need no operator in the loop.
pub fn gate_hann(time: &TimeResponse, center_s: Option<f64>, width_s: f64) -> Result<TimeResponse> {
    check_width(time, width_s)?;
    let center = center_s.unwrap_or_else(|| time.time_at(time.peak_index()));
    let (lo, hi) = (center - width_s / 2.0, center + width_s / 2.0);
    check_window_overlaps_axis(time, lo, hi)?;
    let samples = time
        .samples()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let t = time.time_at(j);
            if t >= lo && t <= hi {
                let w = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * (t - center) / width_s).cos());
                v * w
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(time.with_samples(samples))
}

/// Detects the gate interval from relative thresholds around the global
/// magnitude peak (walk left while `|T| >= rel_start * peak`, right while
/// `|T| >= rel_stop * peak`), then applies a flat-top window with cosine
/// edges over `taper_fraction` of the interval at each side.
pub fn gate_threshold_composite(
    time: &TimeResponse,
    rel_start: f64,
    rel_stop: f64,
    taper_fraction: f64,
) -> Result<TimeResponse> {
    if !(rel_stop > 0.0 && rel_stop <= rel_start && rel_start < 1.0) {
        return Err(Error::Parameter(format!(
            "thresholds must satisfy 0 < rel_stop <= rel_start < 1, got start={rel_start}, stop={rel_stop}"
        )));
    }
    if !(0.0..=0.5).contains(&taper_fraction) {
        return Err(Error::Parameter(format!(
            "taper fraction must lie in [0, 0.5], got {taper_fraction}"
        )));
    }
    let mags: Vec<f64> = time.samples().iter().map(|v| v.norm()).collect();
    let peak_idx = time.peak_index();
    let peak = mags[peak_idx];
    if peak <= 0.0 {
        return Err(Error::Parameter(
            "no sample exceeds the detection thresholds (signal is all zero)".into(),
        ));
    }
    let start_level = rel_start * peak;
    let stop_level = rel_stop * peak;
    let mut i0 = peak_idx;
    while i0 > 0 && mags[i0 - 1] >= start_level {
        i0 -= 1;
    }
    let mut i1 = peak_idx;
    while i1 + 1 < mags.len() && mags[i1 + 1] >= stop_level {
        i1 += 1;
    }

    let len = i1 - i0 + 1;
    let ramp = (taper_fraction * (len as f64 - 1.0)).round() as usize;
    let mut samples = vec![Complex64::new(0.0, 0.0); time.len()];
    for (p, j) in (i0..=i1).enumerate() {
        let w = tukey_weight(p, len, ramp);
        samples[j] = time.samples()[j] * w;
    }
    Ok(time.with_samples(samples))
}

/// Flat top with raised-cosine ramps of `ramp` samples at each edge;
/// `ramp = 0` degenerates to a rectangular window.
fn tukey_weight(p: usize, len: usize, ramp: usize) -> f64 {
    if ramp == 0 {
        return 1.0;
    }
    let mirror = len - 1 - p;
    let edge = p.min(mirror);
    if edge >= ramp {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * edge as f64 / ramp as f64).cos())
    }
}

pub fn apply_gate(time: &TimeResponse, spec: &GateSpec) -> Result<TimeResponse> {
    match *spec {
        GateSpec::Rectangular { distance_m, width_s } => gate_rectangular(time, distance_m, width_s),
        GateSpec::Hann { center_s, width_s } => gate_hann(time, center_s, width_s),
        GateSpec::ThresholdComposite { rel_start, rel_stop, taper_fraction } => {
            gate_threshold_composite(time, rel_start, rel_stop, taper_fraction)
        }
    }
}

/// Applies the gate to one angle column and reads back the gated K-point
/// band.
pub fn gated_band(
    column: &[Complex64],
    freq: &FrequencyGrid,
    spec: &GateSpec,
) -> Result<Vec<Complex64>> {
    let time = to_time_domain(column, freq)?;
    let gated = apply_gate(&time, spec)?;
    Ok(to_frequency_band(&gated, freq))
}

/// Per angle: inverse transform, gate, forward transform, read the
/// magnitude at the band-centre bin.
pub fn gated_pattern(sweep: &SweepSet, spec: &GateSpec) -> Result<Pattern> {
    let freq = *sweep.freq();
    let k0 = freq.center_bin();
    let gate = *spec;
    let angle_values: Vec<f64> = sweep.angles().values().to_vec();
    let columns: Vec<(usize, Vec<Complex64>)> =
        (0..sweep.angles().len()).map(|a| (a, sweep.column(a))).collect();
    let results = par_map(columns, |(a, column)| {
        gated_band(&column, &freq, &gate)
            .map(|band| band[k0].norm())
            .map_err(|e| Error::AtAngle { angle_deg: angle_values[a], source: Box::new(e) })
    });
    let mut values = Vec::with_capacity(results.len());
    for r in results {
        values.push(r?);
    }
    Pattern::new(sweep.angles().clone(), values, freq.f0_hz())
}
