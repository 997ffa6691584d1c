use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::MleCache;
use crate::dataset::{simulate_dataset, Povm, TomographyDataset};
use crate::likelihood::{ratio_statistic, LogLikelihoodFn, MleOptions};
use crate::sampling::{ball_points, qubit_state_grid, trial_seed};
use crate::state::{state_to_bloch, BlochVector, DensityMatrix};
use crate::threshold::check_alpha;
use crate::{Error, Result};

/// Agresti-Coull pseudo-count scale (`z²` for 95%).
const AC_Z2: f64 = 3.841_458_820_694_124;

#[derive(Debug, Clone)]
pub struct BaselineOptions {
    pub calibration_trials: u64,
    pub seed: u64,
    /// Interior low-discrepancy states added to the seven fixed grid states.
    pub grid_interior: usize,
    pub volume_samples: usize,
    pub mle: MleOptions,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            calibration_trials: 2000,
            seed: 0,
            grid_interior: 13,
            volume_samples: 100_000,
            mle: MleOptions::default(),
        }
    }
}

/// Error-ellipsoid baseline and likelihood-ratio region calibrated to the
/// same worst-case coverage over a qubit state grid.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub alpha: f64,
    pub mle_bloch: Vec<f64>,
    /// Unit Bloch vectors of the measured observables.
    pub axes: Vec<Vec<f64>>,
    /// Per-axis standard errors on the observed data.
    pub sigma: Vec<f64>,
    /// Calibrated radius in units of standard errors.
    pub radius: f64,
    pub ellipsoid_volume: f64,
    pub ellipsoid_volume_clipped: f64,
    pub lr_cutoff: f64,
    pub lr_volume: f64,
    pub worst_coverage_ellipsoid: f64,
    pub worst_coverage_ellipsoid_clipped: f64,
    pub worst_coverage_lr: f64,
    pub grid_states: usize,
    pub calibration_trials: u64,
    pub solver_failures: u64,
    pub lr_not_larger: bool,
}

struct PauliFrame {
    axes: Vec<[f64; 3]>,
}

impl PauliFrame {
    /// The dataset must be three two-outcome measurements along mutually
    /// orthogonal Bloch axes.
    fn from_dataset(dataset: &TomographyDataset) -> Result<Self> {
        if dataset.dim() != 2 {
            return Err(Error::InvalidDataset("the ellipsoid baseline is defined for qubits only".into()));
        }
        let settings = dataset.settings();
        if settings.len() != 3 || settings.iter().any(|s| s.effects().len() != 2) {
            return Err(Error::InvalidDataset(
                "the ellipsoid baseline needs exactly three two-outcome settings".into(),
            ));
        }
        let mut axes = Vec::with_capacity(3);
        for s in settings {
            let obs = s.effects()[0].matrix() - s.effects()[1].matrix();
            let v = state_to_bloch(&obs);
            let c = v.components();
            let a = [c[0] / 2.0, c[1] / 2.0, c[2] / 2.0];
            let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            if (norm - 1.0).abs() > 1e-8 || obs.trace().norm() > 1e-8 {
                return Err(Error::InvalidDataset(format!("setting `{}` is not a projective spin measurement", s.name())));
            }
            axes.push(a);
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let dot: f64 = (0..3).map(|k| axes[i][k] * axes[j][k]).sum();
                if dot.abs() > 1e-8 {
                    return Err(Error::InvalidDataset("measured axes are not orthogonal".into()));
                }
            }
        }
        Ok(Self { axes })
    }

    fn coords(&self, v: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, a) in out.iter_mut().zip(&self.axes) {
            *o = a[0] * v[0] + a[1] * v[1] + a[2] * v[2];
        }
        out
    }
}

fn sigmas(dataset: &TomographyDataset) -> [f64; 3] {
    let mut s = [0.0; 3];
    for (o, set) in s.iter_mut().zip(dataset.settings()) {
        let c = set.counts();
        let n = (c[0] + c[1]) as f64 + AC_Z2;
        let p = (c[0] as f64 + AC_Z2 / 2.0) / n;
        *o = 2.0 * (p * (1.0 - p) / n).sqrt();
    }
    s
}

fn quadratic(frame: &PauliFrame, center: &[f64], sigma: &[f64; 3], point: &[f64]) -> f64 {
    let c = frame.coords(center);
    let p = frame.coords(point);
    (0..3).map(|i| ((p[i] - c[i]) / sigma[i]).powi(2)).sum()
}

/// Smallest `v` with at least a fraction `alpha` of `values` at or below it.
fn upper_quantile(values: &mut [f64], alpha: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let k = ((alpha * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[k - 1]
}

/// Naive error ellipsoid with the given number of calibration trials per
/// grid state and default options otherwise.
pub fn naive_ellipsoid_baseline(
    dataset: &TomographyDataset,
    alpha: f64,
    calibration_trials: u64,
    seed: u64,
) -> Result<BaselineReport> {
    naive_ellipsoid_baseline_with(
        dataset,
        alpha,
        &BaselineOptions {
            calibration_trials,
            seed,
            ..BaselineOptions::default()
        },
    )
}

/// Axis-aligned error ellipsoid centered at the MLE with Agresti-Coull
/// standard errors. Its radius, and the likelihood-ratio cutoff it is
/// compared with, are both the largest `α`-quantile over the state grid of
/// the respective statistic of the true state. Volumes are Monte Carlo
/// estimates over the Bloch ball.
pub fn naive_ellipsoid_baseline_with(
    dataset: &TomographyDataset,
    alpha: f64,
    options: &BaselineOptions,
) -> Result<BaselineReport> {
    check_alpha(alpha)?;
    dataset.require_copies()?;
    if options.calibration_trials < 1 {
        return Err(Error::arg("calibration_trials", "must be ≥ 1"));
    }
    let frame = PauliFrame::from_dataset(dataset)?;
    let plan: Vec<(Povm, u64)> = dataset.settings().iter().map(|s| (s.povm().clone(), s.shots())).collect();
    let cache = MleCache::new(options.mle.clone());
    let Some(observed) = cache.get(dataset) else {
        return Err(Error::NonConvergence("maximum likelihood for the observed data".into()));
    };

    let grid = qubit_state_grid(options.grid_interior);
    let trials = options.calibration_trials;
    // per state: (q values, λ values, failures)
    let per_state: Vec<Result<(Vec<f64>, Vec<f64>, u64)>> = grid
        .par_iter()
        .enumerate()
        .map(|(s, rho)| {
            let state_seed = trial_seed(options.seed, s as u64);
            let truth = rho.bloch().components().to_vec();
            let mut qs = Vec::with_capacity(trials as usize);
            let mut ls = Vec::with_capacity(trials as usize);
            let mut failures = 0;
            for t in 0..trials {
                let data = simulate_dataset(rho, &plan, trial_seed(state_seed, t))?;
                let Some(m) = cache.get(&data) else {
                    failures += 1;
                    qs.push(f64::INFINITY);
                    ls.push(f64::INFINITY);
                    continue;
                };
                qs.push(quadratic(&frame, &m.bloch, &sigmas(&data), &truth));
                let ll = LogLikelihoodFn::new(&data).log_likelihood(rho)?;
                ls.push(ratio_statistic(ll, m.loglik_max));
            }
            Ok((qs, ls, failures))
        })
        .collect();
    let mut per_state = per_state.into_iter().collect::<Result<Vec<_>>>()?;

    let mut radius2 = 0.0f64;
    let mut lr_cutoff = 0.0f64;
    let mut failures = 0;
    for (qs, ls, f) in per_state.iter_mut() {
        radius2 = radius2.max(upper_quantile(&mut qs.clone(), alpha));
        lr_cutoff = lr_cutoff.max(upper_quantile(&mut ls.clone(), alpha));
        failures += *f;
    }
    if !radius2.is_finite() || !lr_cutoff.is_finite() {
        return Err(Error::NonConvergence("calibration has too many failed solves".into()));
    }
    let coverage = |vals: &[f64], cut: f64| vals.iter().filter(|&&v| v <= cut).count() as f64 / vals.len() as f64;
    let worst_ellipsoid = per_state.iter().map(|(q, _, _)| coverage(q, radius2)).fold(1.0, f64::min);
    // true states are physical, so clipping to the ball never removes them
    let worst_clipped = grid
        .iter()
        .zip(&per_state)
        .map(|(rho, (q, _, _))| {
            let physical = rho.bloch().norm() <= 1.0 + 1e-12;
            q.iter().filter(|&&v| v <= radius2 && physical).count() as f64 / q.len() as f64
        })
        .fold(1.0, f64::min);
    let worst_lr = per_state.iter().map(|(_, l, _)| coverage(l, lr_cutoff)).fold(1.0, f64::min);

    let sigma = sigmas(dataset);
    let radius = radius2.sqrt();
    let ball = 4.0 / 3.0 * PI;
    let ellipsoid_volume = ball * radius.powi(3) * sigma.iter().product::<f64>();
    let loglik = LogLikelihoodFn::new(dataset);
    let samples = ball_points(options.volume_samples);
    let (in_ellipsoid, in_lr) = samples
        .par_iter()
        .map(|p| {
            let e = quadratic(&frame, &observed.bloch, &sigma, p) <= radius2;
            let rho = DensityMatrix::from_bloch(&BlochVector::new(p.to_vec())).expect("ball point");
            let l = ratio_statistic(loglik.log_likelihood(&rho).expect("qubit"), observed.loglik_max) <= lr_cutoff;
            (e as usize, l as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples.len().max(1) as f64;
    let ellipsoid_volume_clipped = ball * in_ellipsoid as f64 / n;
    let lr_volume = ball * in_lr as f64 / n;
    Ok(BaselineReport {
        alpha,
        mle_bloch: observed.bloch.clone(),
        axes: frame.axes.iter().map(|a| a.to_vec()).collect(),
        sigma: sigma.to_vec(),
        radius,
        ellipsoid_volume,
        ellipsoid_volume_clipped,
        lr_cutoff,
        lr_volume,
        worst_coverage_ellipsoid: worst_ellipsoid,
        worst_coverage_ellipsoid_clipped: worst_clipped,
        worst_coverage_lr: worst_lr,
        grid_states: grid.len(),
        calibration_trials: trials,
        solver_failures: failures,
        lr_not_larger: lr_volume <= ellipsoid_volume_clipped,
    })
}
