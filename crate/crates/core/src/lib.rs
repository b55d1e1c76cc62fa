//! Real-time sound event localization and detection (SELD) front-end.
//!
//! The crate covers the path from multichannel audio to scored detections:
//! block capture ([`audio`]), spectral primitives ([`dsp`]), the MelGCC,
//! SALSA-Lite and SALSA-Mel feature sets ([`features`]), a pluggable model
//! backend with multi-ACCDOA decoding and a MACs cost model ([`inference`]),
//! the deadline-driven processing loop and latency profiler ([`pipeline`]),
//! and the location-dependent SELD metrics ([`metrics`]). [`config`] holds
//! the JSON configuration and [`cli`] the `seld-rt` command-line tool.

// `!(x > 0.0)` is used throughout to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod cli;
pub mod config;
pub mod direction;
pub mod dsp;
pub mod error;
pub mod features;
pub mod inference;
pub mod metrics;
pub mod pipeline;

pub use error::{Result, SeldError};
