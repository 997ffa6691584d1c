use rayon::prelude::*;

use crate::dataset::{born_probabilities, MeasurementSetting, Povm, TomographyDataset};
use crate::likelihood::{mle, ratio_statistic, MleOptions};
use crate::state::DensityMatrix;
use crate::threshold::{check_alpha, ln_gamma, CcdfCurve, Provenance};
use crate::{Error, Result};

/// Default limit on the number of enumerated datasets.
pub const DEFAULT_CAP: u128 = 1_000_000;

/// `λ` values closer than this are one step of the CCDF.
const MERGE_TOL: f64 = 1e-9;

/// Every dataset a measurement plan can produce, with its maximum
/// log-likelihood. Distributions of `λ(ρ)` for any true state are then a
/// sum over the ensemble without further optimization.
#[derive(Debug, Clone)]
pub struct ExhaustiveEnsemble {
    plan: Vec<(Povm, u64)>,
    counts: Vec<Vec<Vec<u64>>>,
    loglik_max: Vec<f64>,
    log_coef: Vec<f64>,
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of datasets the plan can produce, saturating at `u128::MAX`.
pub fn dataset_count(plan: &[(Povm, u64)]) -> u128 {
    plan.iter()
        .map(|(p, n)| {
            let m = p.outcomes() as u64;
            binomial_u128(n + m - 1, m - 1).unwrap_or(u128::MAX)
        })
        .try_fold(1u128, |acc, c| acc.checked_mul(c))
        .unwrap_or(u128::MAX)
}

fn compositions(shots: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 1 {
        return vec![vec![shots]];
    }
    let mut out = Vec::new();
    for first in (0..=shots).rev() {
        for mut rest in compositions(shots - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

impl ExhaustiveEnsemble {
    /// Enumerates the plan's datasets (refusing more than `cap`) and solves
    /// each maximum-likelihood problem.
    pub fn new(plan: &[(Povm, u64)], cap: u128, options: &MleOptions) -> Result<Self> {
        if plan.is_empty() {
            return Err(Error::InvalidDataset("measurement plan has no settings".into()));
        }
        if plan.iter().all(|(_, n)| *n == 0) {
            return Err(Error::InvalidDataset("measurement plan has no shots".into()));
        }
        let count = dataset_count(plan);
        if count > cap {
            return Err(Error::CapExceeded { count, cap });
        }
        let per_setting: Vec<Vec<Vec<u64>>> = plan.iter().map(|(p, n)| compositions(*n, p.outcomes())).collect();
        let mut counts: Vec<Vec<Vec<u64>>> = vec![vec![]];
        for options in &per_setting {
            counts = counts
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |c| {
                        let mut next = prefix.clone();
                        next.push(c.clone());
                        next
                    })
                })
                .collect();
        }
        let dim = plan[0].0.dim();
        let loglik_max = counts
            .par_iter()
            .map(|c| {
                let settings = plan
                    .iter()
                    .zip(c)
                    .map(|((p, _), n)| MeasurementSetting::new(p.clone(), n.clone()))
                    .collect::<Result<Vec<_>>>()?;
                let m = mle(&TomographyDataset::new(dim, settings)?, options)?;
                if !m.converged {
                    return Err(Error::NonConvergence(format!("maximum likelihood for counts {c:?}")));
                }
                Ok(m.loglik_max)
            })
            .collect::<Result<Vec<_>>>()?;
        let log_coef = counts
            .iter()
            .map(|c| {
                c.iter()
                    .map(|ns| ln_factorial(ns.iter().sum()) - ns.iter().map(|&n| ln_factorial(n)).sum::<f64>())
                    .sum()
            })
            .collect();
        Ok(Self {
            plan: plan.to_vec(),
            counts,
            loglik_max,
            log_coef,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn plan(&self) -> &[(Povm, u64)] {
        &self.plan
    }

    /// Per-setting counts of dataset `i`.
    pub fn counts(&self, i: usize) -> &[Vec<u64>] {
        &self.counts[i]
    }

    pub fn loglik_max(&self, i: usize) -> f64 {
        self.loglik_max[i]
    }

    /// `(λ(ρ), Pr(D|ρ))` for every dataset of positive probability.
    pub fn distribution(&self, true_state: &DensityMatrix) -> Result<Vec<(f64, f64)>> {
        let log_probs = self
            .plan
            .iter()
            .map(|(p, _)| Ok(born_probabilities(true_state, p)?.iter().map(|q| q.ln()).collect::<Vec<f64>>()))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(self.len());
        for (i, c) in self.counts.iter().enumerate() {
            let mut ll = 0.0;
            for (ns, lp) in c.iter().zip(&log_probs) {
                for (&n, &l) in ns.iter().zip(lp) {
                    if n > 0 {
                        ll += n as f64 * l;
                    }
                }
            }
            if ll == f64::NEG_INFINITY {
                continue;
            }
            let prob = (self.log_coef[i] + ll).exp();
            if prob > 0.0 {
                out.push((ratio_statistic(ll, self.loglik_max[i]), prob));
            }
        }
        Ok(out)
    }

    /// Exact step CCDF `F(λ) = Pr(λ(ρ) > λ | ρ)`. Values closer than `1e-9`
    /// are merged at the largest of them.
    pub fn ccdf(&self, true_state: &DensityMatrix) -> Result<CcdfCurve> {
        let mut dist = self.distribution(true_state)?;
        let total: f64 = dist.iter().map(|x| x.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("dataset probabilities sum to {total}")));
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut steps: Vec<(f64, f64)> = Vec::new();
        for (l, p) in dist {
            match steps.last_mut() {
                Some(last) if l - last.0 <= MERGE_TOL => {
                    last.0 = l;
                    last.1 += p;
                }
                _ => steps.push((l, p)),
            }
        }
        let mut above = total;
        let points = steps
            .into_iter()
            .map(|(l, p)| {
                above -= p;
                (l, (above / total).clamp(0.0, 1.0))
            })
            .collect();
        CcdfCurve::new(points, Provenance::Exhaustive)
    }

    /// Smallest `λ_c` with `Pr(λ(ρ) > λ_c | ρ) ≤ 1 - α`.
    pub fn cutoff(&self, true_state: &DensityMatrix, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(self.ccdf(true_state)?.cutoff(alpha))
    }
}

/// Exact CCDF of `λ(true_state)` over all datasets of the plan.
pub fn exhaustive_ccdf(
    true_state: &DensityMatrix,
    plan: &[(Povm, u64)],
    cap: u128,
    options: &MleOptions,
) -> Result<CcdfCurve> {
    ExhaustiveEnsemble::new(plan, cap, options)?.ccdf(true_state)
}

/// The tight state-dependent cutoff for `true_state`.
pub fn state_dependent_cutoff(
    true_state: &DensityMatrix,
    plan: &[(Povm, u64)],
    alpha: f64,
    cap: u128,
    options: &MleOptions,
) -> Result<f64> {
    check_alpha(alpha)?;
    ExhaustiveEnsemble::new(plan, cap, options)?.cutoff(true_state, alpha)
}
