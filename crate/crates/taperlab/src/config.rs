//! JSON run configuration shared by the command-line tools.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gating::GateSpec;
use crate::metrics::GateSet;
use crate::tuner::{FitSpace, ObjectiveKind, SearchGrid, TunerOptions};

fn default_t_hb() -> f64 {
    4.0
}

fn default_sigma() -> f64 {
    0.1
}

/// Search-grid axes as ranges; expands to the cross product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_start: usize,
    pub n_stop: usize,
    pub n_step: usize,
    pub q_start: f64,
    pub q_stop: f64,
    pub q_step: f64,
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<SearchGrid> {
        if self.n_step == 0 || self.q_step <= 0.0 {
            return Err(Error::Parameter("grid steps must be positive".into()));
        }
        let n_values: Vec<usize> = (self.n_start..=self.n_stop).step_by(self.n_step).collect();
        let count = ((self.q_stop - self.q_start) / self.q_step).round() as i64;
        if count < 0 {
            return Err(Error::Parameter("q_stop must not precede q_start".into()));
        }
        let q_values: Vec<f64> =
            (0..=count).map(|i| self.q_start + i as f64 * self.q_step).collect();
        SearchGrid::new(n_values, q_values)
    }
}

/// Gate parameters for a comparison run. The rectangular gate needs a
/// measured distance and is omitted when none is known; the others fall
/// back to documented defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GatesConfig {
    #[serde(default)]
    pub rectangular: Option<RectangularConfig>,
    #[serde(default)]
    pub hann: Option<HannConfig>,
    #[serde(default)]
    pub composite: Option<CompositeConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectangularConfig {
    pub distance_m: f64,
    pub width_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HannConfig {
    pub width_s: f64,
    #[serde(default)]
    pub center_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeConfig {
    pub rel_start: f64,
    pub rel_stop: f64,
    pub taper_fraction: f64,
}

impl CompositeConfig {
    /// Threshold defaults used when the config leaves them out.
    pub fn default_values() -> Self {
        Self { rel_start: 0.5, rel_stop: 0.25, taper_fraction: 0.25 }
    }
}

/// Default Hann width: twelve pulse widths `1/B`, wide enough to hold the
/// band-limited main lobe with margin.
pub fn default_hann_width_s(bandwidth_hz: f64) -> f64 {
    12.0 / bandwidth_hz
}

impl GatesConfig {
    /// Resolves the configured gates into concrete gate specs for a sweep
    /// with the given bandwidth.
    pub fn to_gate_set(&self, bandwidth_hz: f64) -> GateSet {
        let rectangular = self
            .rectangular
            .as_ref()
            .map(|r| GateSpec::Rectangular { distance_m: r.distance_m, width_s: r.width_s });
        let hann = Some(match &self.hann {
            Some(h) => GateSpec::Hann { center_s: h.center_s, width_s: h.width_s },
            None => GateSpec::Hann { center_s: None, width_s: default_hann_width_s(bandwidth_hz) },
        });
        let composite = Some(match &self.composite {
            Some(c) => GateSpec::ThresholdComposite {
                rel_start: c.rel_start,
                rel_stop: c.rel_stop,
                taper_fraction: c.taper_fraction,
            },
            None => {
                let c = CompositeConfig::default_values();
                GateSpec::ThresholdComposite {
                    rel_start: c.rel_start,
                    rel_stop: c.rel_stop,
                    taper_fraction: c.taper_fraction,
                }
            }
        });
        GateSet { rectangular, hann, composite }
    }
}

/// One dataset (sweep + reference) at one centre frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub f0_hz: f64,
    pub sweep: PathBuf,
    pub reference: PathBuf,
    /// Per-dataset gate overrides; falls back to the top-level gates.
    #[serde(default)]
    pub gates: Option<GatesConfig>,
}

/// Top-level run configuration for `compare` (and defaults for the other
/// commands).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_t_hb")]
    pub t_hb: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub fit_space: FitSpace,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub gates: GatesConfig,
    #[serde(default)]
    pub datasets: Vec<DatasetConfig>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| Error::Load {
            context: path.display().to_string(),
            msg: e.to_string(),
        })
    }

    pub fn tuner_options(&self) -> Result<TunerOptions> {
        let grid = match &self.grid {
            Some(g) => g.to_grid()?,
            None => SearchGrid::default(),
        };
        Ok(TunerOptions {
            t_hb: self.t_hb,
            sigma: self.sigma,
            grid,
            objective: self.objective,
            fit_space: self.fit_space,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.t_hb, 4.0);
        assert_eq!(cfg.sigma, 0.1);
        assert_eq!(cfg.objective, ObjectiveKind::SquaredResidual);
        assert_eq!(cfg.fit_space, FitSpace::Linear);
        let opts = cfg.tuner_options().unwrap();
        assert_eq!(opts.grid.len(), 153);
    }

    #[test]
    fn grid_config_expands_ranges() {
        let g = GridConfig {
            n_start: 101,
            n_stop: 901,
            n_step: 50,
            q_start: 0.1,
            q_stop: 0.9,
            q_step: 0.1,
        };
        let grid = g.to_grid().unwrap();
        assert_eq!(grid.n_values().len(), 17);
        assert_eq!(grid.q_values().len(), 9);
    }

    #[test]
    fn gates_resolve_with_defaults() {
        let cfg: GatesConfig = serde_json::from_str(
            r#"{ "rectangular": { "distance_m": 1.5, "width_s": 1e-8 } }"#,
        )
        .unwrap();
        let set = cfg.to_gate_set(3e9);
        assert!(matches!(set.rectangular, Some(GateSpec::Rectangular { .. })));
        match set.hann {
            Some(GateSpec::Hann { center_s: None, width_s }) => {
                assert!((width_s - 4e-9).abs() < 1e-12);
            }
            other => panic!("unexpected hann spec {other:?}"),
        }
        assert!(matches!(set.composite, Some(GateSpec::ThresholdComposite { .. })));
    }

    #[test]
    fn objective_variants_parse() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{ "objective": "signed_sum", "fit_space": "decibel" }"#)
                .unwrap();
        assert_eq!(cfg.objective, ObjectiveKind::SignedSum);
        assert_eq!(cfg.fit_space, FitSpace::Decibel);
    }
}
