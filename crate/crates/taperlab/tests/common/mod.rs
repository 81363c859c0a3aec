//! Shared test support: independent oracles and the synthetic benchmark
//! dataset. Everything here is deliberately written against definitions,
//! not against the production code paths it checks.

#![allow(dead_code)]

use taperlab::gating::{GateSpec, SPEED_OF_LIGHT_M_S};
use taperlab::metrics::GateSet;
use taperlab::sweep::{AngleGrid, FrequencyGrid, Pattern, SweepSet};
use taperlab::synth::{synthesize, ChannelSpec, EchoProfile, EchoSpec};

/// Dense cyclic-Jacobi symmetric eigensolver. Returns eigenvalues in
/// descending order with matching unit eigenvectors. O(n^3) per sweep but
/// entirely independent of the tridiagonal production route.
pub fn jacobi_eigh_desc(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * fro.max(1e-300);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if t == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// The concentration kernel written out from its definition, independent
/// of the library's builder.
pub fn oracle_sinc_kernel(n: usize, w_norm: f64) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for g in 0..n {
        for r in 0..n {
            a[g * n + r] = if g == r {
                2.0 * w_norm
            } else {
                let m = g as f64 - r as f64;
                (2.0 * std::f64::consts::PI * m * w_norm).sin() / (std::f64::consts::PI * m)
            };
        }
    }
    a
}

/// Segment count by walking start offsets until the segment would leave
/// the axis; the loop-based oracle for the closed-form count.
pub fn segment_count_by_loop(total: usize, n: usize, s: usize) -> usize {
    let mut count = 0;
    let mut start = 0;
    while start + n <= total {
        count += 1;
        start += s;
    }
    count
}

pub const BENCH_F0_HZ: f64 = 4.0e9;
pub const BENCH_BW_HZ: f64 = 3.0e9;
pub const BENCH_K: usize = 201;
pub const BENCH_LOS_DELAY_S: f64 = 5e-9;

pub fn bench_grid() -> FrequencyGrid {
    FrequencyGrid::new(BENCH_F0_HZ - BENCH_BW_HZ / 2.0, BENCH_F0_HZ + BENCH_BW_HZ / 2.0, BENCH_K)
        .unwrap()
}

/// 72-angle truth pattern: a smooth main lobe at 0 degrees over a -26 dB
/// backlobe floor, so echo-dominated angles genuinely stress the methods.
pub fn bench_truth() -> Pattern {
    let angles = AngleGrid::uniform(0.0, 5.0, 72).unwrap();
    let values: Vec<f64> = angles
        .values()
        .iter()
        .map(|a| {
            let r = a.to_radians();
            0.05 + 0.95 * (0.5 + 0.5 * r.cos()).powf(1.5)
        })
        .collect();
    Pattern::new(angles, values, BENCH_F0_HZ).unwrap()
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 20.0)
}

/// The benchmark channel: line of sight at 5 ns, echoes at 9/14/22 ns
/// with -6/-10/-12 dB lobed profiles, noise floor -30 dB.
pub fn bench_channel(seed: u64) -> ChannelSpec {
    ChannelSpec {
        los_delay_s: BENCH_LOS_DELAY_S,
        echoes: vec![
            EchoSpec {
                delay_s: 9e-9,
                amplitude: db(-6.0),
                profile: EchoProfile::Lobed { peak_angle_deg: 180.0 },
            },
            EchoSpec {
                delay_s: 14e-9,
                amplitude: db(-10.0),
                profile: EchoProfile::Lobed { peak_angle_deg: 90.0 },
            },
            EchoSpec {
                delay_s: 22e-9,
                amplitude: db(-12.0),
                profile: EchoProfile::Lobed { peak_angle_deg: 270.0 },
            },
        ],
        noise_floor: db(-30.0),
        seed,
        slope_db_per_ghz: 0.0,
    }
}

pub fn bench_sweep(seed: u64) -> SweepSet {
    synthesize(&bench_truth(), &bench_grid(), &bench_channel(seed)).unwrap()
}

/// Baseline gate configuration for the benchmark comparisons.
///
/// The rectangular gate is centred from the exact air-path distance but,
/// because the distance-only method cannot see cable and antenna group
/// delays, uses a generous +-4 ns window. The Hann gate auto-centres on
/// the per-angle peak with a 4 ns (twelve pulse widths) window. The
/// composite gate uses its documented threshold defaults.
pub fn bench_gates() -> GateSet {
    GateSet {
        rectangular: Some(GateSpec::Rectangular {
            distance_m: SPEED_OF_LIGHT_M_S * BENCH_LOS_DELAY_S,
            width_s: 8e-9,
        }),
        hann: Some(GateSpec::Hann { center_s: None, width_s: 4e-9 }),
        composite: Some(GateSpec::ThresholdComposite {
            rel_start: 0.5,
            rel_stop: 0.25,
            taper_fraction: 0.25,
        }),
    }
}

/// Noise-free line-of-sight-only sweep for sanity checks.
pub fn los_only_sweep() -> SweepSet {
    let spec = ChannelSpec {
        los_delay_s: BENCH_LOS_DELAY_S,
        echoes: vec![],
        noise_floor: 0.0,
        seed: 0,
        slope_db_per_ghz: 0.0,
    };
    synthesize(&bench_truth(), &bench_grid(), &spec).unwrap()
}
