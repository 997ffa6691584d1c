use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::sampling::linspace_unit;
use crate::threshold::check_alpha;
use crate::{Error, Result};

/// Slack for comparing summed probabilities with `α`.
const COVERAGE_SLACK: f64 = 1e-12;

/// A finite statistical model: candidate states, every possible dataset and
/// the table `Pr(D|ρ)`, plus an averaging prior and volume weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    states: Vec<f64>,
    likelihood: Vec<Vec<f64>>,
    prior: Vec<f64>,
    volume: Vec<f64>,
    marginal: Vec<f64>,
    marginal_override: bool,
}

fn check_weights(w: &[f64], n: usize, field: &str) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::arg(field, "weights must be finite and nonnegative"));
    }
    Ok(())
}

impl DiscreteModel {
    /// `likelihood[i][j] = Pr(D_j | ρ_i)`; each row must sum to 1.
    pub fn new(states: Vec<f64>, likelihood: Vec<Vec<f64>>, prior: Vec<f64>, volume: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if n == 0 || likelihood.len() != n {
            return Err(Error::arg("likelihood", "need one row per state and at least one state"));
        }
        let m = likelihood[0].len();
        for (i, row) in likelihood.iter().enumerate() {
            if row.len() != m || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::arg("likelihood", format!("row {i} is not a probability vector")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::arg("likelihood", format!("row {i} sums to {total}")));
            }
        }
        check_weights(&prior, n, "prior")?;
        let mass: f64 = prior.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::arg("prior", format!("sums to {mass}, not 1")));
        }
        check_weights(&volume, n, "volume")?;
        if volume.iter().any(|&w| w <= 0.0) {
            return Err(Error::arg("volume", "weights must be positive"));
        }
        let marginal = (0..m)
            .map(|j| (0..n).map(|i| prior[i] * likelihood[i][j]).sum())
            .collect();
        Ok(Self {
            states,
            likelihood,
            prior,
            volume,
            marginal,
            marginal_override: false,
        })
    }

    /// Coins with the given heads probabilities, `flips` tosses each;
    /// dataset `j` is `j` heads. Labels are `⟨σ_z⟩ = 2p - 1`.
    pub fn coin_with_probs(probs: &[f64], flips: u64) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::arg("probs", "must lie in [0, 1]"));
        }
        let choose = |h: u64| (0..h).fold(1.0f64, |c, i| c * (flips - i) as f64 / (i + 1) as f64);
        let likelihood = probs
            .iter()
            .map(|&p| {
                (0..=flips)
                    .map(|h| choose(h) * p.powi(h as i32) * (1.0 - p).powi((flips - h) as i32))
                    .collect()
            })
            .collect();
        let n = probs.len();
        Self::new(
            probs.iter().map(|p| 2.0 * p - 1.0).collect(),
            likelihood,
            vec![1.0 / n as f64; n],
            vec![1.0; n],
        )
    }

    /// Coins whose `⟨σ_z⟩` values are `n_states` points evenly spaced on
    /// `[-1, 1]`, uniform prior and volume.
    pub fn coin(n_states: usize, flips: u64) -> Result<Self> {
        let probs: Vec<f64> = linspace_unit(n_states).iter().map(|z| (0.5 * (1.0 + z)).clamp(0.0, 1.0)).collect();
        Self::coin_with_probs(&probs, flips)
    }

    pub fn with_prior(self, prior: Vec<f64>) -> Result<Self> {
        Self::new(self.states, self.likelihood, prior, self.volume)
    }

    pub fn with_volume(mut self, volume: Vec<f64>) -> Result<Self> {
        check_weights(&volume, self.states.len(), "volume")?;
        if volume.iter().any(|&w| w <= 0.0) {
            return Err(Error::arg("volume", "weights must be positive"));
        }
        self.volume = volume;
        Ok(self)
    }

    /// Replaces `Pr(D)` by a caller-chosen positive weighting. A dataset
    /// that some state with prior mass can produce must keep positive weight.
    pub fn with_marginal(mut self, marginal: Vec<f64>) -> Result<Self> {
        check_weights(&marginal, self.datasets(), "marginal")?;
        for (j, &w) in marginal.iter().enumerate() {
            let produced = (0..self.states.len()).any(|i| self.prior[i] > 0.0 && self.likelihood[i][j] > 0.0);
            if w == 0.0 && produced {
                return Err(Error::InvalidDataset(format!(
                    "dataset {j} has zero marginal probability but positive likelihood under the prior"
                )));
            }
        }
        self.marginal = marginal;
        self.marginal_override = true;
        Ok(self)
    }

    /// `Pr(D) ∝ max_ρ Pr(D|ρ)`, normalized; ranking by the ratio then ranks by
    /// likelihood ratio.
    pub fn lr_marginal(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.datasets())
            .map(|j| self.likelihood.iter().map(|row| row[j]).fold(0.0, f64::max))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn datasets(&self) -> usize {
        self.likelihood[0].len()
    }

    pub fn likelihood(&self, state: usize, dataset: usize) -> f64 {
        self.likelihood[state][dataset]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn volume(&self) -> &[f64] {
        &self.volume
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn has_marginal_override(&self) -> bool {
        self.marginal_override
    }

    /// `r(D;ρ) = Pr(D|ρ) / Pr(D)`, `+∞` when only the denominator vanishes.
    pub fn ratio(&self, state: usize, dataset: usize) -> f64 {
        let l = self.likelihood[state][dataset];
        let m = self.marginal[dataset];
        if l == 0.0 {
            0.0
        } else if m == 0.0 {
            f64::INFINITY
        } else {
            l / m
        }
    }
}

/// A region estimator on a discrete model, as the relation "state `i` is
/// in the region for dataset `j`".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    connected: Vec<Vec<bool>>,
}

impl Assignment {
    pub fn from_relation(connected: Vec<Vec<bool>>) -> Self {
        Self { connected }
    }

    pub fn is_connected(&self, state: usize, dataset: usize) -> bool {
        self.connected[state][dataset]
    }

    /// State indices in the region for `dataset`.
    pub fn region(&self, dataset: usize) -> Vec<usize> {
        (0..self.connected.len()).filter(|&i| self.connected[i][dataset]).collect()
    }

    /// `Σ_{D ∼ ρ} Pr(D|ρ)`.
    pub fn coverage(&self, model: &DiscreteModel, state: usize) -> f64 {
        (0..model.datasets())
            .filter(|&j| self.connected[state][j])
            .map(|j| model.likelihood(state, j))
            .sum()
    }

    /// Index and coverage of the worst-covered state.
    pub fn worst_coverage(&self, model: &DiscreteModel) -> (usize, f64) {
        (0..model.states().len())
            .map(|i| (i, self.coverage(model, i)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty model")
    }

    /// Errors with the first state covered less than `α`.
    pub fn check_coverage(&self, model: &DiscreteModel, alpha: f64) -> Result<()> {
        self.check_shape(model)?;
        for i in 0..model.states().len() {
            let c = self.coverage(model, i);
            if c < alpha - COVERAGE_SLACK {
                return Err(Error::arg(
                    "challenger",
                    format!("state {i} (label {}) has coverage {c} < {alpha}", model.states()[i]),
                ));
            }
        }
        Ok(())
    }

    fn check_shape(&self, model: &DiscreteModel) -> Result<()> {
        if self.connected.len() != model.states().len()
            || self.connected.iter().any(|r| r.len() != model.datasets())
        {
            return Err(Error::arg("challenger", "relation shape does not match the model"));
        }
        Ok(())
    }

    /// `⟨V̄⟩ = Σ_D Pr(D) V(R(D))` with the model's marginal and volume.
    pub fn average_volume(&self, model: &DiscreteModel) -> f64 {
        (0..model.datasets())
            .map(|j| {
                let v: f64 = self.region(j).iter().map(|&i| model.volume()[i]).sum();
                model.marginal()[j] * v
            })
            .sum()
    }
}

/// Connects each state to datasets in the given order until the connected
/// conditional probability reaches `α`.
fn greedy(model: &DiscreteModel, alpha: f64, order: impl Fn(usize) -> Vec<usize>) -> Assignment {
    let connected = (0..model.states().len())
        .map(|i| {
            let mut row = vec![false; model.datasets()];
            let mut mass = 0.0;
            for j in order(i) {
                if mass >= alpha {
                    break;
                }
                if model.likelihood(i, j) > 0.0 {
                    row[j] = true;
                    mass += model.likelihood(i, j);
                }
            }
            row
        })
        .collect();
    Assignment { connected }
}

/// Datasets sorted by descending `score`, ties in ascending index.
fn ranked(n: usize, score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    idx
}

/// The probability-ratio estimator: every state is connected to datasets in
/// descending `r(D;ρ)` (ties by dataset index) until coverage `α`.
pub fn pr_assignment(model: &DiscreteModel, alpha: f64) -> Result<Assignment> {
    check_alpha(alpha)?;
    Ok(greedy(model, alpha, |i| ranked(model.datasets(), |j| model.ratio(i, j))))
}

/// States in the probability-ratio region for one dataset.
pub fn pr_region(model: &DiscreteModel, dataset_index: usize, alpha: f64) -> Result<Vec<usize>> {
    if dataset_index >= model.datasets() {
        return Err(Error::arg("dataset_index", format!("model has {} datasets", model.datasets())));
    }
    Ok(pr_assignment(model, alpha)?.region(dataset_index))
}

/// The trivial estimator that always reports every state.
pub fn always_everything(model: &DiscreteModel) -> Assignment {
    Assignment {
        connected: vec![vec![true; model.datasets()]; model.states().len()],
    }
}

/// Greedy in a uniformly random dataset order per state.
pub fn random_challenger<R: Rng + ?Sized>(model: &DiscreteModel, alpha: f64, rng: &mut R) -> Assignment {
    let orders: Vec<Vec<usize>> = (0..model.states().len())
        .map(|_| {
            let mut o: Vec<usize> = (0..model.datasets()).collect();
            o.shuffle(rng);
            o
        })
        .collect();
    greedy(model, alpha, |i| orders[i].clone())
}

/// Greedy by `r(D;ρ)` multiplied by log-normal noise of scale `noise`: a
/// near-miss of the probability-ratio ordering.
pub fn perturbed_pr_challenger<R: Rng + ?Sized>(model: &DiscreteModel, alpha: f64, noise: f64, rng: &mut R) -> Assignment {
    let scores: Vec<Vec<f64>> = (0..model.states().len())
        .map(|i| {
            (0..model.datasets())
                .map(|j| {
                    let g: f64 = rng.sample(StandardNormal);
                    model.ratio(i, j) * (noise * g).exp()
                })
                .collect()
        })
        .collect();
    greedy(model, alpha, |i| ranked(model.datasets(), |j| scores[i][j]))
}

/// Likelihood-ratio regions on the model with the smallest constant cutoff
/// that covers every state: `ρ ∼ D` iff `Pr(D|ρ) / max_ρ' Pr(D|ρ') ≥ e^{-c/2}`.
/// Returns the assignment and the cutoff `c`.
pub fn lr_assignment(model: &DiscreteModel, alpha: f64) -> Result<(Assignment, f64)> {
    check_alpha(alpha)?;
    let n = model.states().len();
    let m = model.datasets();
    let best: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| model.likelihood(i, j)).fold(0.0, f64::max))
        .collect();
    let lam = |i: usize, j: usize| {
        let l = model.likelihood(i, j);
        if l == 0.0 {
            f64::INFINITY
        } else {
            (2.0 * (best[j].ln() - l.ln())).max(0.0)
        }
    };
    let mut cutoff = 0.0f64;
    for i in 0..n {
        let mut order: Vec<usize> = (0..m).filter(|&j| model.likelihood(i, j) > 0.0).collect();
        order.sort_by(|&a, &b| lam(i, a).total_cmp(&lam(i, b)));
        let mut mass = 0.0;
        for &j in &order {
            mass += model.likelihood(i, j);
            if mass >= alpha {
                cutoff = cutoff.max(lam(i, j));
                break;
            }
        }
    }
    let connected = (0..n).map(|i| (0..m).map(|j| lam(i, j) <= cutoff).collect()).collect();
    Ok((Assignment { connected }, cutoff))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalityComparison {
    pub pr_volume: f64,
    pub challenger_volume: f64,
    pub pr_worst_coverage: f64,
    pub challenger_worst_coverage: f64,
    /// `⟨V̄⟩_PR ≤ ⟨V̄⟩_challenger + 1e-12`.
    pub pr_not_worse: bool,
}

/// Compares the probability-ratio estimator with a valid challenger by
/// average expected volume.
pub fn pr_optimality_check(model: &DiscreteModel, alpha: f64, challenger: &Assignment) -> Result<OptimalityComparison> {
    challenger.check_coverage(model, alpha)?;
    let pr = pr_assignment(model, alpha)?;
    let pr_volume = pr.average_volume(model);
    let challenger_volume = challenger.average_volume(model);
    Ok(OptimalityComparison {
        pr_volume,
        challenger_volume,
        pr_worst_coverage: pr.worst_coverage(model).1,
        challenger_worst_coverage: challenger.worst_coverage(model).1,
        pr_not_worse: pr_volume <= challenger_volume + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_state_coin() {
        let m = DiscreteModel::coin_with_probs(&[0.0, 1.0], 1).unwrap();
        assert_eq!(m.marginal(), &[0.5, 0.5]);
        assert_eq!(m.ratio(1, 1), 2.0);
        assert_eq!(m.ratio(1, 0), 0.0);
        // dataset 1 = one head
        assert_eq!(pr_region(&m, 1, 0.9).unwrap(), vec![1]);
        assert_eq!(pr_region(&m, 0, 0.9).unwrap(), vec![0]);
        assert!(pr_region(&m, 2, 0.9).is_err());
    }

    #[test]
    fn delta_prior_ratio() {
        let m = DiscreteModel::coin(5, 4).unwrap().with_prior(vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = m.likelihood(i, j) / m.likelihood(2, j);
                assert!((m.ratio(i, j) - want).abs() <= 1e-15 * want.max(1.0));
            }
        }
        let a = pr_assignment(&m, 0.9).unwrap();
        a.check_coverage(&m, 0.9).unwrap();
    }

    #[test]
    fn zero_ratio_denominator() {
        // states p = 0 and p = 1 with all prior mass on p = 0
        let m = DiscreteModel::coin_with_probs(&[0.0, 1.0], 1).unwrap().with_prior(vec![1.0, 0.0]).unwrap();
        assert_eq!(m.ratio(1, 1), f64::INFINITY);
        assert!(pr_assignment(&m, 0.9).unwrap().is_connected(1, 1));
        let bad = DiscreteModel::coin(3, 2).unwrap().with_marginal(vec![0.0, 0.5, 0.5]);
        assert!(bad.is_err());
    }

    #[test]
    fn pr_meets_coverage_and_beats_trivial() {
        let m = DiscreteModel::coin(21, 10).unwrap();
        let pr = pr_assignment(&m, 0.9).unwrap();
        for i in 0..21 {
            assert!(pr.coverage(&m, i) >= 0.9);
        }
        let all = always_everything(&m);
        let cmp = pr_optimality_check(&m, 0.9, &all).unwrap();
        assert!(cmp.pr_not_worse);
        assert!((cmp.challenger_worst_coverage - 1.0).abs() < 1e-12);
        assert!((cmp.challenger_volume - 21.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_challenger_rejected() {
        let m = DiscreteModel::coin(5, 4).unwrap();
        let none = Assignment::from_relation(vec![vec![false; 5]; 5]);
        assert!(pr_optimality_check(&m, 0.9, &none).is_err());
    }

    #[test]
    fn challengers_are_valid() {
        let m = DiscreteModel::coin(21, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            random_challenger(&m, 0.9, &mut rng).check_coverage(&m, 0.9).unwrap();
            perturbed_pr_challenger(&m, 0.9, 0.3, &mut rng).check_coverage(&m, 0.9).unwrap();
        }
        let (lr, c) = lr_assignment(&m, 0.9).unwrap();
        lr.check_coverage(&m, 0.9).unwrap();
        assert!(c > 0.0);
    }

    #[test]
    fn model_validation() {
        assert!(DiscreteModel::new(vec![0.0], vec![vec![0.5, 0.4]], vec![1.0], vec![1.0]).is_err());
        assert!(DiscreteModel::new(vec![0.0], vec![vec![0.5, 0.5]], vec![0.5], vec![1.0]).is_err());
        assert!(DiscreteModel::new(vec![0.0], vec![vec![0.5, 0.5]], vec![1.0], vec![0.0]).is_err());
        let m = DiscreteModel::coin(21, 10).unwrap();
        for i in 0..21 {
            let s: f64 = (0..11).map(|j| m.likelihood(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
