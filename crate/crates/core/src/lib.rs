//! Bayesian change-point detection for discrete time series.
//!
//! Each segment of a series is modelled as a variable-memory Markov chain
//! described by a context tree. Models and parameters are integrated out
//! exactly with context-tree weighting, so the posterior over the number and
//! location of change-points can be sampled directly by Metropolis–Hastings.
//!
//! Module map:
//!
//! - [`sequence`]: alphabets, encoded sequences, FASTA / plain / CSV ingestion.
//! - [`bct`]: count trees, KT estimates, evidence, MAP trees, brute-force oracle.
//! - [`changepoint`]: change-point configurations, priors, cached joint evidence,
//!   exact single-change-point posterior.
//! - [`mcmc`]: fixed and variable-count samplers, traces and summaries.
//! - [`simulator`]: piece-wise chain generation and stationary analysis.

pub mod bct;
pub mod changepoint;
mod error;
pub mod logmath;
pub mod mcmc;
pub mod sequence;
pub mod simulator;

pub use error::{Error, Result};

/// A symbol code in `0..m`.
pub type Symbol = u8;
