//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `context` names the file and line of the first
    /// offending record.
    #[error("{context}: {msg}")]
    Load { context: String, msg: String },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The assembled spectrum does not cover the extraction bin for this
    /// segmentation. Reported distinctly so the tuner can skip the design.
    #[error("centre-frequency bin not covered by the assembled spectrum (n={n}, s={s})")]
    Coverage { n: usize, s: usize },

    #[error("at angle {angle_deg} deg: {source}")]
    AtAngle {
        angle_deg: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("tuning failed: {0}")]
    Tune(String),
}

impl Error {
    /// Stable machine-readable tag for CLI error reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Load { .. } => "load",
            Error::Grid(_) => "grid",
            Error::Parameter(_) => "parameter",
            Error::Numeric(_) => "numeric",
            Error::Coverage { .. } => "coverage",
            Error::AtAngle { source, .. } => source.kind(),
            Error::Tune(_) => "tune",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
