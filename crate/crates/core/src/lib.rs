//! Deterministic plus stochastic residual vocoder.
//!
//! The excitation left after mel-cepstral inverse filtering is modelled as a
//! pitch-normalised eigen-residual in the low band plus envelope-shaped,
//! AR-filtered noise in the high band.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod eigen;
pub mod envelope;
mod error;
pub mod linalg;
pub mod noise;
pub mod metrics;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod pitch;
pub mod resample;
pub mod rng;
pub mod signal;
pub mod spectrum;
pub mod synth;
pub mod wav;
pub mod window;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
