//! Likelihood-ratio confidence regions `{ρ : λ(ρ) ≤ λ_α}` and the queries
//! they support.
//!
//! A region is stored implicitly by its data, cutoff and maximum
//! likelihood. Membership is a single likelihood evaluation; extreme values
//! of an observable are solved as concave programs; explicit enclosures are
//! fitted to points sampled on the boundary.

mod enclosure;

pub use enclosure::{minimum_enclosing_ball, minimum_volume_ellipsoid, Enclosure, EnclosureKind};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::TomographyDataset;
use crate::likelihood::{maximize, mle_with, ratio_statistic, LogLikelihoodFn, MleOptions, MleResult, Objective};
use crate::sampling::{hilbert_schmidt_state, sphere_directions, trial_seed};
use crate::state::{
    bloch_displacement, hermitian_eigenvalues, is_hermitian, min_eigenvalue, trace_product, BlochVector, CMatrix,
    DensityMatrix, HERMITIAN_TOL,
};
use crate::threshold::{check_alpha, solve_threshold, ThresholdRule};
use crate::{Error, Result};

/// Absolute tolerance on `λ` at boundary points.
pub const BOUNDARY_TOL: f64 = 1e-8;
/// Target width of the bracket around each support-interval endpoint.
pub const SUPPORT_TOL: f64 = 1e-7;

/// A confidence region for one dataset.
#[derive(Debug, Clone)]
pub struct RegionSpec {
    dataset: TomographyDataset,
    alpha: f64,
    rule: ThresholdRule,
    lambda_alpha: f64,
    mle: MleResult,
    loglik: LogLikelihoodFn,
    options: MleOptions,
}

/// Extreme value of an observable over a region, as an inner and outer
/// bound on the exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportBound {
    pub value: f64,
    /// Value attained by a member state.
    pub attained: f64,
    /// Certified bound from the dual problem.
    pub certified: f64,
    /// The extreme is set by the state space rather than by the cutoff.
    pub physicality_limited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportInterval {
    pub min: f64,
    pub max: f64,
    pub min_detail: SupportBound,
    pub max_detail: SupportBound,
}

/// Where the ray from the MLE along `direction` leaves the region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub direction: Vec<f64>,
    pub point: Vec<f64>,
    pub t: f64,
    pub lambda: f64,
    /// The ray left the state space before reaching `λ_α`.
    pub clipped: bool,
}

impl RegionSpec {
    pub fn new(dataset: TomographyDataset, alpha: f64, rule: ThresholdRule, options: &MleOptions) -> Result<Self> {
        check_alpha(alpha)?;
        dataset.require_copies()?;
        let lambda_alpha = solve_threshold(&rule, alpha)?;
        let loglik = LogLikelihoodFn::new(&dataset);
        let mle = mle_with(&loglik, options)?;
        Self::assemble(dataset, alpha, rule, lambda_alpha, mle, loglik, options)
    }

    /// Reuses an already computed maximum for `dataset`.
    pub fn with_mle(
        dataset: TomographyDataset,
        alpha: f64,
        rule: ThresholdRule,
        mle: MleResult,
        options: &MleOptions,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        dataset.require_copies()?;
        let lambda_alpha = solve_threshold(&rule, alpha)?;
        let loglik = LogLikelihoodFn::new(&dataset);
        if mle.rho_mle.dim() != dataset.dim() {
            return Err(Error::DimensionMismatch {
                expected: dataset.dim(),
                found: mle.rho_mle.dim(),
            });
        }
        Self::assemble(dataset, alpha, rule, lambda_alpha, mle, loglik, options)
    }

    fn assemble(
        dataset: TomographyDataset,
        alpha: f64,
        rule: ThresholdRule,
        lambda_alpha: f64,
        mle: MleResult,
        loglik: LogLikelihoodFn,
        options: &MleOptions,
    ) -> Result<Self> {
        if !mle.converged {
            return Err(Error::NonConvergence(format!(
                "maximum-likelihood solve stopped after {} iterations (residual {:e})",
                mle.iterations, mle.gradient_residual
            )));
        }
        Ok(Self {
            dataset,
            alpha,
            rule,
            lambda_alpha,
            mle,
            loglik,
            options: options.clone(),
        })
    }

    pub fn dataset(&self) -> &TomographyDataset {
        &self.dataset
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rule(&self) -> &ThresholdRule {
        &self.rule
    }

    pub fn lambda_alpha(&self) -> f64 {
        self.lambda_alpha
    }

    pub fn mle(&self) -> &MleResult {
        &self.mle
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            })
        }
    }

    fn lambda_raw(&self, rho: &CMatrix) -> f64 {
        ratio_statistic(self.loglik.eval(rho), self.mle.loglik_max)
    }

    /// `λ(ρ)` for this region's data.
    pub fn lambda(&self, rho: &DensityMatrix) -> Result<f64> {
        self.check_dim(rho.dim())?;
        Ok(self.lambda_raw(rho.matrix()))
    }

    /// `λ(ρ) ≤ λ_α`.
    pub fn contains(&self, rho: &DensityMatrix) -> Result<bool> {
        Ok(self.lambda(rho)? <= self.lambda_alpha)
    }

    pub fn contains_bloch(&self, v: &BlochVector) -> Result<bool> {
        let rho = DensityMatrix::from_bloch(v)?;
        self.contains(&rho)
    }

    /// Minimum and maximum of `Tr(Xρ)` over the region.
    pub fn support_interval(&self, observable: &CMatrix) -> Result<SupportInterval> {
        self.check_dim(observable.nrows())?;
        if !observable.is_square() || !is_hermitian(observable, HERMITIAN_TOL) {
            return Err(Error::arg("observable", "must be a Hermitian matrix"));
        }
        let max_detail = self.support_max(observable)?;
        let neg = self.support_max(&(-observable))?;
        let min_detail = SupportBound {
            value: -neg.value,
            attained: -neg.attained,
            certified: -neg.certified,
            physicality_limited: neg.physicality_limited,
        };
        Ok(SupportInterval {
            min: min_detail.value,
            max: max_detail.value,
            min_detail,
            max_detail,
        })
    }

    /// `max Tr(Xρ)` subject to `λ(ρ) ≤ λ_α`.
    ///
    /// For `μ > 0` the maximizer `ρ(μ)` of `ℓ(ρ) + μ Tr(Xρ)` is the
    /// extreme state for the cutoff `λ(ρ(μ))`, and `(g(μ) - ℓ_max + λ_α/2)/μ`
    /// bounds the extreme value from above. Bisection on `ln μ` drives
    /// `λ(ρ(μ))` to `λ_α` until the two bounds meet.
    fn support_max(&self, x: &CMatrix) -> Result<SupportBound> {
        let d = self.dim();
        let x = crate::state::hermitian_part(x);
        let offset = x.trace().re / d as f64;
        let mut x0 = x.clone();
        for i in 0..d {
            x0[(i, i)].re -= offset;
        }
        let eig = hermitian_eigenvalues(&x0);
        let top = *eig.last().expect("non-empty");
        let spread = top - eig[0];
        let mle_val = trace_product(&x0, self.mle.rho_mle.matrix());
        let done = |attained: f64, certified: f64, limited: bool| SupportBound {
            value: offset + if limited { attained } else { 0.5 * (attained + certified) },
            attained: offset + attained,
            certified: offset + certified,
            physicality_limited: limited,
        };
        if spread <= 1e-14 {
            return Ok(done(mle_val, mle_val, false));
        }
        if self.lambda_alpha.is_infinite() {
            return Ok(done(top, top, true));
        }
        if self.lambda_alpha <= 0.0 {
            return Ok(done(mle_val, mle_val, false));
        }

        let threshold = self.mle.loglik_max - 0.5 * self.lambda_alpha;
        let base = self.loglik.total_copies().max(1.0) / spread;
        let mut warm = self.mle.rho_mle.matrix().clone();
        let mut attained = mle_val;
        let mut certified = top;

        let probe = |mu: f64, warm: &mut CMatrix| -> Result<(f64, f64, f64)> {
            let obj = Objective {
                loglik: &self.loglik,
                linear: Some(x0.scale(mu)),
            };
            let sol = maximize(&obj, warm, &self.options)?;
            if !sol.converged {
                return Err(Error::NonConvergence(format!(
                    "support-interval subproblem at multiplier {mu:e} did not converge"
                )));
            }
            let t = trace_product(&x0, &sol.rho);
            let ll = sol.value - mu * t;
            let lam = ratio_statistic(ll, self.mle.loglik_max);
            let dual = (sol.value + sol.gap - threshold) / mu;
            *warm = sol.rho;
            Ok((t, lam, dual))
        };

        // bracket in u = ln(μ / base)
        let mut lo_u = f64::NEG_INFINITY;
        let mut hi_u = f64::INFINITY;
        let mut u = 0.0f64;
        let max_u = 60.0;
        let mut limited = false;
        for _ in 0..200 {
            let (t, lam, dual) = probe(base * u.exp(), &mut warm)?;
            certified = certified.min(dual);
            if lam <= self.lambda_alpha {
                attained = attained.max(t);
                lo_u = u;
            } else {
                hi_u = u;
            }
            if certified - attained <= SUPPORT_TOL {
                break;
            }
            if hi_u.is_infinite() {
                if u >= max_u {
                    limited = true;
                    break;
                }
                u += 2.0;
            } else if lo_u.is_infinite() {
                u -= 2.0;
                if u < -60.0 {
                    break;
                }
            } else {
                if hi_u - lo_u < 1e-13 {
                    break;
                }
                u = 0.5 * (lo_u + hi_u);
            }
        }
        if limited || top - attained <= SUPPORT_TOL {
            return Ok(done(attained, certified.min(top), true));
        }
        if certified - attained > 1e-6 {
            return Err(Error::NonConvergence(format!(
                "support interval bracket [{attained}, {certified}] wider than 1e-6"
            )));
        }
        Ok(done(attained, certified, false))
    }

    /// Largest `t` with `MLE + t·direction` positive semidefinite.
    fn physical_extent(&self, step: &CMatrix) -> f64 {
        let base = self.mle.rho_mle.matrix();
        let psd = |t: f64| min_eigenvalue(&(base + step.scale(t))) >= 0.0;
        let mut lo = 0.0;
        let mut hi = 1.0;
        while psd(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if psd(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Boundary point along a ray from the MLE in Bloch coordinates.
    pub fn boundary_sample(&self, direction: &[f64]) -> Result<BoundaryPoint> {
        let d = self.dim();
        let n = d * d - 1;
        if direction.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: direction.len(),
            });
        }
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::arg("direction", "must be a nonzero finite vector"));
        }
        let unit: Vec<f64> = direction.iter().map(|x| x / norm).collect();
        let step = bloch_displacement(&unit, d);
        let base = self.mle.rho_mle.matrix();
        let at = |t: f64| self.lambda_raw(&(base + step.scale(t)));
        let t_phys = self.physical_extent(&step);
        let origin = self.mle.rho_mle.bloch();
        let finish = |t: f64, lambda: f64, clipped: bool| BoundaryPoint {
            direction: unit.clone(),
            point: origin.components().iter().zip(&unit).map(|(o, u)| o + t * u).collect(),
            t,
            lambda,
            clipped,
        };
        let edge = at(t_phys);
        if edge <= self.lambda_alpha {
            return Ok(finish(t_phys, edge, true));
        }
        let (mut lo, mut hi) = (0.0, t_phys);
        let mut best = (0.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let l = at(mid);
            if l <= self.lambda_alpha {
                lo = mid;
                best = (mid, l);
            } else {
                hi = mid;
            }
            if self.lambda_alpha - best.1 <= BOUNDARY_TOL || hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(finish(best.0, best.1, false))
    }

    /// Deterministic boundary samples: `n` low-discrepancy directions plus
    /// both signs of every coordinate axis.
    pub fn boundary_samples(&self, n: usize, extra: &[Vec<f64>]) -> Result<Vec<BoundaryPoint>> {
        let dim = self.dim() * self.dim() - 1;
        let mut dirs = sphere_directions(dim, n);
        for i in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = s;
                dirs.push(e);
            }
        }
        dirs.extend(extra.iter().cloned());
        dirs.par_iter().map(|d| self.boundary_sample(d)).collect()
    }

    /// Ellipsoid fitted to `n_samples` boundary samples.
    pub fn bounding_ellipsoid(&self, n_samples: usize, epsilon: f64) -> Result<(Enclosure, Vec<BoundaryPoint>)> {
        let d = self.dim();
        if n_samples < d * d {
            return Err(Error::arg("n_samples", format!("need at least d² = {}", d * d)));
        }
        let samples = self.boundary_samples(n_samples, &[])?;
        let pts: Vec<Vec<f64>> = samples.iter().map(|b| b.point.clone()).collect();
        Ok((minimum_volume_ellipsoid(&pts, epsilon)?, samples))
    }

    /// Smallest ball around `n_samples` boundary samples.
    pub fn bounding_ball(&self, n_samples: usize) -> Result<(Enclosure, Vec<BoundaryPoint>)> {
        let d = self.dim();
        if n_samples < d * d {
            return Err(Error::arg("n_samples", format!("need at least d² = {}", d * d)));
        }
        let samples = self.boundary_samples(n_samples, &[])?;
        let pts: Vec<Vec<f64>> = samples.iter().map(|b| b.point.clone()).collect();
        Ok((minimum_enclosing_ball(&pts)?, samples))
    }

    /// Fraction of the state space (Hilbert-Schmidt measure; uniform over
    /// the Bloch ball for a qubit) inside the region.
    pub fn volume_fraction(&self, samples: usize, seed: u64) -> f64 {
        volume_fraction(self.dim(), samples, seed, |rho| self.lambda_raw(rho) <= self.lambda_alpha)
    }
}

const VOLUME_CHUNK: usize = 4096;

/// Monte Carlo estimate of the Hilbert-Schmidt measure of `{ρ : inside(ρ)}`.
pub fn volume_fraction<F>(dim: usize, samples: usize, seed: u64, inside: F) -> f64
where
    F: Fn(&CMatrix) -> bool + Sync,
{
    if samples == 0 {
        return 0.0;
    }
    let chunks = samples.div_ceil(VOLUME_CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, c as u64));
            let count = VOLUME_CHUNK.min(samples - c * VOLUME_CHUNK);
            (0..count)
                .filter(|_| inside(hilbert_schmidt_state(&mut rng, dim).matrix()))
                .count()
        })
        .sum();
    hits as f64 / samples as f64
}
