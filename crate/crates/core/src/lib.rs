//! Likelihood-ratio confidence regions for quantum state tomography.
//!
//! The crate is organised bottom-up:
//!
//! - [`state`]: density matrices, effects, generalized Bloch coordinates.
//! - [`dataset`]: POVMs with observed counts, the JSON dataset format and
//!   seeded simulation of tomography experiments.
//! - [`likelihood`]: multinomial log-likelihood, its gradient, the
//!   constrained maximum-likelihood estimate and the loglikelihood ratio.
//! - [`threshold`]: chi-squared and multinomial tail bounds and their
//!   inversion to confidence cutoffs.
//! - [`region`]: membership, support intervals, boundary sampling and
//!   explicit enclosures of likelihood-ratio regions.
//! - [`studies`]: exhaustive CCDFs, Monte Carlo coverage, probability-ratio
//!   estimators and the naive error-bar baseline.
//! - [`cli`]: the `lrtomo` command-line front end.

pub mod cli;
pub mod dataset;
mod error;
pub mod likelihood;
pub mod region;
pub mod sampling;
pub mod state;
pub mod studies;
pub mod threshold;

pub use dataset::{simulate_dataset, MeasurementSetting, Povm, TomographyDataset};
pub use error::{Error, Result};
pub use likelihood::{lambda, mle, LogLikelihoodFn, MleOptions, MleResult};
pub use region::{Enclosure, RegionSpec};
pub use state::{bloch_to_state, state_to_bloch, BlochVector, DensityMatrix, Effect};
pub use threshold::{solve_threshold, ThresholdRule};

