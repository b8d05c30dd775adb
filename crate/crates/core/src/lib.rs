//! ECU fingerprinting from CAN-High voltage pulses.
//!
//! Traces are segmented into dominant-bit pulses, each pulse is described by
//! step-response and spectral features, and a single-hidden-layer perceptron
//! learns which ECU transmitted it.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod features_spectral;
pub mod features_time;
pub mod mlp;
pub mod preprocess;
pub mod seeds;
pub mod tuning;

pub use error::{Error, Result};
