//! Multinomial log-likelihood, maximum-likelihood estimation and the
//! loglikelihood ratio `λ(ρ) = -2 ln[L(ρ)/L_max]`.
//!
//! Reported log-likelihoods omit the multinomial coefficients. They cancel in
//! every ratio computed here, so values are only comparable within one
//! dataset.

use std::collections::VecDeque;

use crate::dataset::TomographyDataset;
use crate::state::{
    hermitian_eigenvalues, hermitian_part, trace_product, CMatrix, DensityMatrix,
};
use crate::{Error, Result};

/// The log-likelihood of one dataset, with effects and nonzero counts cached.
#[derive(Debug, Clone)]
pub struct LogLikelihoodFn {
    dim: usize,
    terms: Vec<(CMatrix, f64)>,
    total: f64,
}

impl LogLikelihoodFn {
    pub fn new(dataset: &TomographyDataset) -> Self {
        let terms = dataset
            .settings()
            .iter()
            .flat_map(|s| s.effects().iter().zip(s.counts()))
            .filter(|(_, &n)| n > 0)
            .map(|(e, &n)| (e.matrix().clone(), n as f64))
            .collect();
        Self {
            dim: dataset.dim(),
            terms,
            total: dataset.total_copies() as f64,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_copies(&self) -> f64 {
        self.total
    }

    fn check_dim(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        Ok(())
    }

    /// `Σ nₖ ln pₖ` over outcomes with `nₖ > 0`; `-∞` when any such `pₖ = 0`.
    pub fn log_likelihood(&self, rho: &DensityMatrix) -> Result<f64> {
        self.check_dim(rho)?;
        Ok(self.eval(rho.matrix()))
    }

    /// Unchecked evaluation on any Hermitian matrix of the right size.
    pub(crate) fn eval(&self, rho: &CMatrix) -> f64 {
        let mut acc = 0.0;
        for (e, n) in &self.terms {
            let p = trace_product(e, rho).min(1.0);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += n * p.ln();
        }
        acc
    }

    /// Value and gradient `Σ (nₖ/pₖ) Eₖ`; `None` when the value is `-∞`.
    pub(crate) fn eval_with_gradient(&self, rho: &CMatrix) -> Option<(f64, CMatrix)> {
        let mut acc = 0.0;
        let mut grad = CMatrix::zeros(self.dim, self.dim);
        for (e, n) in &self.terms {
            let p = trace_product(e, rho).min(1.0);
            if p <= 0.0 {
                return None;
            }
            acc += n * p.ln();
            grad += e.scale(n / p);
        }
        Some((acc, grad))
    }

    /// Gradient of the log-likelihood with respect to `ρ` (a Hermitian
    /// matrix `G` with `d/dt ln L(ρ + tΔ) = Tr(GΔ)`).
    pub fn gradient(&self, rho: &DensityMatrix) -> Result<CMatrix> {
        self.check_dim(rho)?;
        self.eval_with_gradient(rho.matrix())
            .map(|(_, g)| g)
            .ok_or_else(|| {
                Error::Domain("state assigns zero probability to an observed outcome".into())
            })
    }

    /// `λ(ρ)` given the maximum log-likelihood; `+∞` for zero likelihood.
    pub fn lambda_given_max(&self, rho: &DensityMatrix, loglik_max: f64) -> Result<f64> {
        Ok(ratio_statistic(self.log_likelihood(rho)?, loglik_max))
    }
}

/// `-2(ℓ - ℓ_max)` clamped at zero; `+∞` for `ℓ = -∞`.
pub(crate) fn ratio_statistic(loglik: f64, loglik_max: f64) -> f64 {
    if loglik == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (2.0 * (loglik_max - loglik)).max(0.0)
    }
}

/// Stopping rule and line-search constants for the likelihood maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    /// Bound on `λmax(G) - Tr(Gρ)`, which upper-bounds the optimality gap.
    pub gap_tolerance: f64,
    /// Maximum objective improvement over `stall_window` iterations.
    pub stall_tolerance: f64,
    pub stall_window: usize,
    pub max_iterations: usize,
    pub armijo: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-8,
            stall_tolerance: 1e-12,
            stall_window: 10,
            max_iterations: 100_000,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho_mle: DensityMatrix,
    /// Maximum log-likelihood in nats (multinomial coefficients omitted).
    pub loglik_max: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of `λmax(G) - Tr(Gρ)`.
    pub gradient_residual: f64,
}

/// Concave objective `ℓ(ρ) + Tr(Cρ)` over density matrices.
pub(crate) struct Objective<'a> {
    pub loglik: &'a LogLikelihoodFn,
    pub linear: Option<CMatrix>,
}

impl Objective<'_> {
    fn value(&self, rho: &CMatrix) -> f64 {
        let v = self.loglik.eval(rho);
        match &self.linear {
            Some(c) if v.is_finite() => v + trace_product(c, rho),
            _ => v,
        }
    }

    fn value_and_gradient(&self, rho: &CMatrix) -> Option<(f64, CMatrix)> {
        let (mut v, mut g) = self.loglik.eval_with_gradient(rho)?;
        if let Some(c) = &self.linear {
            v += trace_product(c, rho);
            g += c;
        }
        Some((v, g))
    }
}

pub(crate) struct Solution {
    pub rho: CMatrix,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gap: f64,
}

/// Euclidean projection of a real vector onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Nearest density matrix in Frobenius norm: eigendecompose and project the
/// spectrum onto the simplex. Matrices that are already positive
/// semidefinite are returned with only their trace renormalized.
pub(crate) fn project_to_states(h: &CMatrix) -> CMatrix {
    let h = hermitian_part(h);
    let d = h.nrows();
    let mut eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&w| w >= 0.0) {
        let shift = (h.trace().re - 1.0) / d as f64;
        let mut out = h;
        for i in 0..d {
            out[(i, i)].re -= shift;
        }
        return out;
    }
    let w: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    for (dst, src) in eig.eigenvalues.iter_mut().zip(project_simplex(&w)) {
        *dst = src;
    }
    hermitian_part(&eig.recompose())
}

fn traceless(g: &CMatrix) -> CMatrix {
    let d = g.nrows();
    let shift = g.trace().re / d as f64;
    let mut out = g.clone();
    for i in 0..d {
        out[(i, i)].re -= shift;
    }
    out
}

fn residual(g: &CMatrix, rho: &CMatrix) -> f64 {
    let top = *hermitian_eigenvalues(&hermitian_part(g)).last().expect("non-empty");
    (top - trace_product(g, rho)).max(0.0)
}

/// Increase of the objective from `a` to `b`. When the two values agree to
/// within rounding, the trapezoid estimate from the directional derivatives
/// at both ends is used instead, keeping the line search meaningful down to
/// gradient precision.
fn increase(fa: f64, fb: f64, slope_a: f64, slope_b: f64) -> f64 {
    let noise = 1e-11 * (1.0 + fa.abs());
    if (fb - fa).abs() > noise {
        fb - fa
    } else {
        0.5 * (slope_a + slope_b)
    }
}

/// Accelerated projected gradient ascent with backtracking and
/// function-value restarts.
///
/// The step is halved until the trial point lies above the quadratic model
/// `f(y) + ⟨g, s⟩ - |s|²/2t` and satisfies the Armijo condition. All inner
/// products use the traceless part of the gradient since every iterate has
/// unit trace.
pub(crate) fn maximize(obj: &Objective<'_>, start: &CMatrix, opts: &MleOptions) -> Result<Solution> {
    let d = obj.loglik.dim();
    let mut x = project_to_states(start);
    let mut fx = obj.value(&x);
    if !fx.is_finite() {
        x = CMatrix::identity(d, d).scale(1.0 / d as f64);
        fx = obj.value(&x);
    }
    if !fx.is_finite() {
        return Err(Error::Domain(
            "every candidate state assigns zero probability to observed data".into(),
        ));
    }
    let mut gx = obj.value_and_gradient(&x).expect("finite start").1;
    let mut x_prev = x.clone();
    let mut momentum = 1.0f64;
    let mut step = 1.0 / obj.loglik.total_copies().max(1.0);
    let mut history: VecDeque<f64> = VecDeque::with_capacity(opts.stall_window + 1);
    history.push_back(fx);
    let mut gap = f64::INFINITY;

    for iter in 1..=opts.max_iterations {
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let extrapolated = (beta > 0.0)
            .then(|| project_to_states(&(&x + (&x - &x_prev).scale(beta))))
            .and_then(|y| obj.value_and_gradient(&y).map(|(fy, gy)| (y, fy, gy)));
        let (y, fy, gy) = extrapolated.unwrap_or_else(|| (x.clone(), fx, gx.clone()));
        let g0 = traceless(&gy);

        step = (step * 2.0).min(1e12);
        let (z, fz, gz) = loop {
            let z = project_to_states(&(&y + g0.scale(step)));
            if let Some((fz, gz)) = obj.value_and_gradient(&z) {
                let s = &z - &y;
                let ascent = trace_product(&g0, &s);
                let gain = increase(fy, fz, ascent, trace_product(&traceless(&gz), &s));
                let model = ascent - trace_product(&s, &s) / (2.0 * step);
                if gain >= model.max(opts.armijo * ascent) {
                    break (z, fz, gz);
                }
            }
            step *= 0.5;
            if step < 1e-300 {
                break (y.clone(), fy, gy.clone());
            }
        };

        let s = &z - &x;
        if increase(fx, fz, trace_product(&traceless(&gx), &s), trace_product(&traceless(&gz), &s)) < 0.0 {
            momentum = 1.0;
            x_prev = x.clone();
            continue;
        }
        x_prev = std::mem::replace(&mut x, z);
        fx = fz;
        gx = gz;
        momentum = next_momentum;

        gap = residual(&gx, &x);
        history.push_back(fx);
        if history.len() > opts.stall_window + 1 {
            history.pop_front();
        }
        let improvement = fx - history.front().copied().unwrap_or(f64::NEG_INFINITY);
        if history.len() == opts.stall_window + 1
            && gap <= opts.gap_tolerance
            && improvement <= opts.stall_tolerance
        {
            return Ok(Solution {
                rho: x,
                value: fx,
                iterations: iter,
                converged: true,
                gap,
            });
        }
    }
    Ok(Solution {
        rho: x,
        value: fx,
        iterations: opts.max_iterations,
        converged: false,
        gap,
    })
}

/// Maximum-likelihood estimate over all density matrices, started at `I/d`.
pub fn mle(dataset: &TomographyDataset, options: &MleOptions) -> Result<MleResult> {
    dataset.require_copies()?;
    let f = LogLikelihoodFn::new(dataset);
    mle_with(&f, options)
}

pub(crate) fn mle_with(f: &LogLikelihoodFn, options: &MleOptions) -> Result<MleResult> {
    let d = f.dim();
    let start = CMatrix::identity(d, d).scale(1.0 / d as f64);
    let sol = maximize(
        &Objective {
            loglik: f,
            linear: None,
        },
        &start,
        options,
    )?;
    Ok(MleResult {
        rho_mle: DensityMatrix::from_trusted(sol.rho),
        loglik_max: sol.value,
        iterations: sol.iterations,
        converged: sol.converged,
        gradient_residual: sol.gap,
    })
}

/// `λ(ρ)` for a dataset. Pass a previously computed [`MleResult`] to avoid
/// re-solving; a non-converged maximum is reported as an error.
pub fn lambda(
    dataset: &TomographyDataset,
    rho: &DensityMatrix,
    mle_cache: Option<&MleResult>,
) -> Result<f64> {
    let f = LogLikelihoodFn::new(dataset);
    let owned;
    let m = match mle_cache {
        Some(m) => m,
        None => {
            owned = mle(dataset, &MleOptions::default())?;
            &owned
        }
    };
    if !m.converged {
        return Err(Error::NonConvergence(format!(
            "maximum-likelihood solve stopped after {} iterations (residual {:e})",
            m.iterations, m.gradient_residual
        )));
    }
    f.lambda_given_max(rho, m.loglik_max)
}
