//! Post-processing toolkit for antenna transmission sweeps measured in
//! reflective (non-anechoic) environments.
//!
//! The core pipeline takes a complex frequency sweep per rotation angle,
//! converts it to the time domain, splits the time response into overlapped
//! segments, recombines per-segment spectra computed with discrete prolate
//! spheroidal (Slepian) tapers, and reads the corrected response at the band
//! centre. Around that sit classical time-gating baselines, a synthetic
//! multipath channel generator for ground-truth experiments, an exhaustive
//! setup-parameter tuner, and pattern fidelity metrics.
//!
//! The per-angle and per-design loops are data parallel. With the default
//! `parallel` feature they run on rayon; build with
//! `--no-default-features` for a sequential fallback with identical results.

pub mod config;
pub mod dpss;
pub mod error;
mod fft;
pub mod gating;
pub mod metrics;
pub mod multitaper;
mod parallel;
pub mod sweep;
pub mod synth;
pub mod tuner;

pub use error::{Error, Result};
