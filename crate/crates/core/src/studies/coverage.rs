use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::{wilson_interval, MleCache, Z95};
use crate::dataset::{matrix_to_json, simulate_dataset, Povm};
use crate::likelihood::{ratio_statistic, LogLikelihoodFn, MleOptions};
use crate::sampling::trial_seed;
use crate::state::DensityMatrix;
use crate::threshold::{solve_threshold, ThresholdRule};
use crate::{Error, Result};

fn state_as_json<S: Serializer>(rho: &DensityMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_json(rho.matrix()).serialize(s)
}

/// Monte Carlo estimate of `Pr(λ(ρ) ≤ λ_α | ρ)`.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    #[serde(serialize_with = "state_as_json")]
    pub true_state: DensityMatrix,
    pub bloch: Vec<f64>,
    pub trials: u64,
    pub hits: u64,
    pub coverage: f64,
    pub wilson_interval: (f64, f64),
    pub rule: ThresholdRule,
    pub alpha: f64,
    pub lambda_alpha: f64,
    /// Trials whose maximum-likelihood solve failed; counted as misses.
    pub solver_failures: u64,
    pub seed: u64,
}

impl CoverageReport {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.wilson_interval.1 - self.wilson_interval.0)
    }
}

/// Simulates `trials` datasets from `true_state` and counts those whose
/// region contains it. Trial `i` uses seed `trial_seed(seed, i)`.
pub fn coverage_mc(
    true_state: &DensityMatrix,
    plan: &[(Povm, u64)],
    rule: &ThresholdRule,
    alpha: f64,
    trials: u64,
    seed: u64,
    options: &MleOptions,
) -> Result<CoverageReport> {
    coverage_mc_with_cache(true_state, plan, rule, alpha, trials, seed, &MleCache::new(options.clone()))
}

/// As [`coverage_mc`], reusing maxima from `cache`, which must only ever
/// have seen datasets of this plan.
pub fn coverage_mc_with_cache(
    true_state: &DensityMatrix,
    plan: &[(Povm, u64)],
    rule: &ThresholdRule,
    alpha: f64,
    trials: u64,
    seed: u64,
    cache: &MleCache,
) -> Result<CoverageReport> {
    if trials < 1 {
        return Err(Error::arg("trials", "must be ≥ 1"));
    }
    let lambda_alpha = solve_threshold(rule, alpha)?;
    let outcomes: Vec<Result<Option<bool>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            if lambda_alpha.is_infinite() {
                return Ok(Some(true));
            }
            let data = simulate_dataset(true_state, plan, trial_seed(seed, i))?;
            let Some(max) = cache.loglik_max(&data) else {
                return Ok(None);
            };
            let ll = LogLikelihoodFn::new(&data).log_likelihood(true_state)?;
            Ok(Some(ratio_statistic(ll, max) <= lambda_alpha))
        })
        .collect();
    let mut hits = 0;
    let mut failures = 0;
    for o in outcomes {
        match o? {
            Some(true) => hits += 1,
            Some(false) => {}
            None => failures += 1,
        }
    }
    Ok(CoverageReport {
        true_state: true_state.clone(),
        bloch: true_state.bloch().components().to_vec(),
        trials,
        hits,
        coverage: hits as f64 / trials as f64,
        wilson_interval: wilson_interval(hits, trials, Z95),
        rule: *rule,
        alpha,
        lambda_alpha,
        solver_failures: failures,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{pauli_setting, pauli_settings};

    #[test]
    fn infinite_cutoff_covers() {
        let plan: Vec<_> = pauli_settings().into_iter().map(|p| (p, 20)).collect();
        let r = coverage_mc(
            &DensityMatrix::maximally_mixed(2),
            &plan,
            &ThresholdRule::Fixed { lambda: f64::INFINITY },
            0.9,
            50,
            1,
            &MleOptions::default(),
        )
        .unwrap();
        assert_eq!(r.hits, 50);
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn two_flip_coin_is_always_covered() {
        let plan = vec![(pauli_setting("z").unwrap(), 2)];
        let rule = ThresholdRule::Fixed { lambda: 4.0 * 2f64.ln() + 1e-9 };
        let r = coverage_mc(&DensityMatrix::maximally_mixed(2), &plan, &rule, 0.9, 200, 9, &MleOptions::default()).unwrap();
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.solver_failures, 0);
    }

    #[test]
    fn reproducible() {
        let plan: Vec<_> = pauli_settings().into_iter().map(|p| (p, 5)).collect();
        let rule = ThresholdRule::ChiSquare { k: 3 };
        let rho = DensityMatrix::maximally_mixed(2);
        let opts = MleOptions::default();
        let a = coverage_mc(&rho, &plan, &rule, 0.9, 200, 42, &opts).unwrap();
        let b = coverage_mc(&rho, &plan, &rule, 0.9, 200, 42, &opts).unwrap();
        assert_eq!(a.hits, b.hits);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(coverage_mc(&rho, &plan, &rule, 0.9, 0, 42, &opts).is_err());
    }
}
