//! Verification studies: exact distributions of `λ` by enumeration, Monte
//! Carlo coverage, probability-ratio estimators on discrete models and a
//! naive error-ellipsoid baseline.

mod baseline;
mod coverage;
mod enumerate;
mod pr;

pub use baseline::{naive_ellipsoid_baseline, naive_ellipsoid_baseline_with, BaselineOptions, BaselineReport};
pub use coverage::{coverage_mc, coverage_mc_with_cache, CoverageReport};
pub use enumerate::{exhaustive_ccdf, state_dependent_cutoff, ExhaustiveEnsemble, DEFAULT_CAP};
pub use pr::{
    always_everything, lr_assignment, perturbed_pr_challenger, pr_assignment, pr_optimality_check, pr_region, random_challenger,
    Assignment, DiscreteModel, OptimalityComparison,
};

use std::collections::HashMap;
use std::sync::Mutex;

use crate::dataset::TomographyDataset;
use crate::likelihood::{mle, MleOptions};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `hits` successes in `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// A cached maximum: `max ℓ` and the maximizer's Bloch vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedMle {
    pub loglik_max: f64,
    pub bloch: Vec<f64>,
}

/// Maximum-likelihood solutions keyed by the flattened counts of a dataset.
/// `None` records a solve that did not converge.
///
/// Only the counts are keyed, so one cache must only be used with a single
/// measurement plan.
#[derive(Debug, Default)]
pub struct MleCache {
    options: MleOptions,
    map: Mutex<HashMap<Vec<u64>, Option<CachedMle>>>,
}

impl MleCache {
    pub fn new(options: MleOptions) -> Self {
        Self {
            options,
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The solution for the dataset, solving on a miss.
    pub fn get(&self, dataset: &TomographyDataset) -> Option<CachedMle> {
        let key = dataset.flat_counts();
        if let Some(v) = self.map.lock().expect("cache lock").get(&key) {
            return v.clone();
        }
        let v = mle(dataset, &self.options)
            .ok()
            .filter(|m| m.converged)
            .map(|m| CachedMle {
                loglik_max: m.loglik_max,
                bloch: m.rho_mle.bloch().components().to_vec(),
            });
        self.map.lock().expect("cache lock").insert(key, v.clone());
        v
    }

    pub fn loglik_max(&self, dataset: &TomographyDataset) -> Option<f64> {
        self.get(dataset).map(|m| m.loglik_max)
    }
}
