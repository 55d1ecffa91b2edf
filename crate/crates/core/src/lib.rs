//! Bias assessment for score-based verification systems.
//!
//! The crate implements the full evaluation pipeline: ingesting genuine and
//! impostor similarity scores per demographic group, computing verification
//! performance (EER, TPR at a fixed FPR), bootstrapping per-group performance
//! distributions, comparing groups with four bias metrics (Statistical Parity,
//! Equality of Opportunity, Welch T-test, N-Sigma), checking the normality
//! precondition with a Shapiro-Wilk test, and mapping N-Sigma distances onto
//! configurable risk tiers. A synthetic score simulator with controllable bias
//! injection supports end-to-end calibration without any model training.

pub mod biasmetrics;
pub mod error;
pub mod ingest;
pub mod perf;
pub mod resample;
pub mod risk;
pub mod seed;
pub mod synth;

mod summary;

pub use error::{Error, Result};
