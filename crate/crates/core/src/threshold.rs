//! Confidence cutoffs for likelihood-ratio regions.
//!
//! Three tail functions for `λ(ρ_true)` are provided: the chi-squared CCDF
//! (an optimistic Gaussian approximation), a multinomial upper bound valid
//! for independent measurements on identical copies, and the looser
//! `N^{d²-1} e^{-λ/2}` bound that holds for any measurement. Each is inverted
//! to a cutoff `λ_α` by bisection.

use std::f64::consts::{E, PI};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::TomographyDataset;
use crate::likelihood::MleOptions;
use crate::region::RegionSpec;
use crate::state::CMatrix;
use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x)/Γ(a)`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q domain: a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::arg("lambda", format!("must be ≥ 0, got {lambda}")))
    }
}

fn check_dof(k: u32) -> Result<()> {
    if k >= 1 {
        Ok(())
    } else {
        Err(Error::arg("k", "degrees of freedom must be ≥ 1"))
    }
}

/// `Pr(χ²_k > λ) = Q(k/2, λ/2)`.
pub fn chi2_ccdf(k: u32, lambda: f64) -> Result<f64> {
    check_dof(k)?;
    check_lambda(lambda)?;
    Ok(gamma_q(k as f64 / 2.0, lambda / 2.0))
}

/// `e^{-λ/2}[(1+s)^k - s^k]` with `s = √(3eλ)/π`, evaluated in log space.
fn eq9_excess(k: u32, lambda: f64) -> f64 {
    let s = (3.0 * E * lambda).sqrt() / PI;
    let k = k as f64;
    let lead = (k * s.ln_1p() - 0.5 * lambda).exp();
    let ratio_pow = k * (s / (1.0 + s)).ln();
    lead * -ratio_pow.exp_m1()
}

/// The multinomial tail bound before clamping: chi-squared CCDF plus
/// `e^{-λ/2}[(1+s)^k - s^k]`.
pub fn eq9_bound_raw(k: u32, lambda: f64) -> Result<f64> {
    Ok(chi2_ccdf(k, lambda)? + eq9_excess(k, lambda))
}

/// Multinomial tail bound clamped to `[0, 1]`.
pub fn eq9_bound(k: u32, lambda: f64) -> Result<f64> {
    Ok(eq9_bound_raw(k, lambda)?.clamp(0.0, 1.0))
}

/// `min(1, N^{d²-1} e^{-λ/2})`, valid for any measurement on `N` copies.
pub fn lemma1_bound(copies: u64, dim: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if copies < 1 {
        return Err(Error::arg("N", "must be ≥ 1"));
    }
    if dim < 2 {
        return Err(Error::arg("d", "must be ≥ 2"));
    }
    let exponent = (dim * dim - 1) as f64 * (copies as f64).ln() - 0.5 * lambda;
    Ok(exponent.min(0.0).exp())
}

/// How the cutoff `λ_α` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Chi-squared CCDF with `k` degrees of freedom.
    ChiSquare { k: u32 },
    /// Multinomial upper bound with `k` degrees of freedom.
    Eq9Bound { k: u32 },
    /// `N^{d²-1} e^{-λ/2}` bound.
    Lemma1 { copies: u64, dim: usize },
    /// An explicit cutoff, e.g. a state-dependent value or `+∞`.
    Fixed { lambda: f64 },
}

/// Rule families selectable by name; the parameters come from a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Chi2,
    Eq9,
    Lemma1,
}

impl RuleKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "chi2" | "chisquare" | "chi-square" => Ok(Self::Chi2),
            "eq9" | "multinomial" => Ok(Self::Eq9),
            "lemma1" => Ok(Self::Lemma1),
            other => Err(Error::arg("rule", format!("unknown rule `{other}` (chi2|eq9|lemma1)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Chi2 => "chi2",
            Self::Eq9 => "eq9",
            Self::Lemma1 => "lemma1",
        }
    }
}

impl ThresholdRule {
    /// The rule of the given family with parameters taken from `dataset`:
    /// `k` from [`degrees_of_freedom`], `N` and `d` from the data.
    pub fn for_dataset(kind: RuleKind, dataset: &TomographyDataset) -> Result<Self> {
        Ok(match kind {
            RuleKind::Chi2 => Self::ChiSquare {
                k: degrees_of_freedom(dataset)?,
            },
            RuleKind::Eq9 => Self::Eq9Bound {
                k: degrees_of_freedom(dataset)?,
            },
            RuleKind::Lemma1 => Self::Lemma1 {
                copies: dataset.total_copies().max(1),
                dim: dataset.dim(),
            },
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ChiSquare { .. } => "chi2",
            Self::Eq9Bound { .. } => "eq9",
            Self::Lemma1 { .. } => "lemma1",
            Self::Fixed { .. } => "fixed",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::ChiSquare { k } | Self::Eq9Bound { k } => check_dof(k),
            Self::Lemma1 { copies, dim } => {
                if copies < 1 {
                    Err(Error::arg("N", "must be ≥ 1"))
                } else if dim < 2 {
                    Err(Error::arg("d", "must be ≥ 2"))
                } else {
                    Ok(())
                }
            }
            Self::Fixed { lambda } => {
                if lambda >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::arg("lambda", "fixed cutoff must be ≥ 0"))
                }
            }
        }
    }

    /// The tail bound `F(λ)` this rule inverts; `None` for fixed cutoffs.
    pub fn bound(&self, lambda: f64) -> Result<Option<f64>> {
        Ok(match *self {
            Self::ChiSquare { k } => Some(chi2_ccdf(k, lambda)?),
            Self::Eq9Bound { k } => Some(eq9_bound(k, lambda)?),
            Self::Lemma1 { copies, dim } => Some(lemma1_bound(copies, dim, lambda)?),
            Self::Fixed { .. } => None,
        })
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ChiSquare { k } => write!(f, "chi2(k={k})"),
            Self::Eq9Bound { k } => write!(f, "eq9(k={k})"),
            Self::Lemma1 { copies, dim } => write!(f, "lemma1(N={copies}, d={dim})"),
            Self::Fixed { lambda } => write!(f, "fixed({lambda})"),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::arg("alpha", format!("must lie in (0, 1), got {alpha}")))
    }
}

/// Absolute bisection tolerance on `λ_α`.
pub const THRESHOLD_TOL: f64 = 1e-10;

/// Smallest `λ` with `bound(λ) ≤ 1 - α`.
pub fn solve_threshold(rule: &ThresholdRule, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    rule.validate()?;
    if let ThresholdRule::Fixed { lambda } = *rule {
        return Ok(lambda);
    }
    let target = 1.0 - alpha;
    let f = |l: f64| rule.bound(l).map(|b| b.expect("bounded rule"));
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::NonConvergence(format!("no cutoff found for {rule} at α = {alpha}")));
        }
    }
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Number of linearly independent observables measured: the rank of the real
/// span of all effects (singular values above `1e-9` of the largest) minus
/// one for the identity. Equals `d² - 1` for informationally complete data.
pub fn degrees_of_freedom(dataset: &TomographyDataset) -> Result<u32> {
    let d = dataset.dim();
    let effects: Vec<_> = dataset
        .settings()
        .iter()
        .flat_map(|s| s.effects().iter())
        .collect();
    let rows = effects.len();
    let m = DMatrix::<f64>::from_fn(rows, 2 * d * d, |r, c| {
        let z = effects[r].matrix()[(c / 2 / d, (c / 2) % d)];
        if c % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-9 * top).count();
    if rank < 2 {
        return Err(Error::InvalidDataset(
            "measurements carry no information (only the identity is measured)".into(),
        ));
    }
    Ok((rank - 1) as u32)
}

/// Where a tabulated CCDF came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exhaustive,
    ChiSquare,
    Eq9Bound,
    Lemma1,
}

/// Tabulated `(λ, F(λ))` pairs with `λ` strictly increasing and `F`
/// non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    points: Vec<(f64, f64)>,
    provenance: Provenance,
}

impl CcdfCurve {
    pub fn new(points: Vec<(f64, f64)>, provenance: Provenance) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::arg("points", "λ must be strictly increasing"));
            }
            if w[1].1 > w[0].1 + 1e-12 {
                return Err(Error::arg("points", "F must be non-increasing"));
            }
        }
        if points.iter().any(|&(l, f)| l < 0.0 || !(0.0..=1.0 + 1e-12).contains(&f)) {
            return Err(Error::arg("points", "need λ ≥ 0 and F in [0, 1]"));
        }
        Ok(Self { points, provenance })
    }

    /// Tabulates a bounded rule's tail function on a grid.
    pub fn tabulate(rule: &ThresholdRule, grid: &[f64]) -> Result<Self> {
        let provenance = match rule {
            ThresholdRule::ChiSquare { .. } => Provenance::ChiSquare,
            ThresholdRule::Eq9Bound { .. } => Provenance::Eq9Bound,
            ThresholdRule::Lemma1 { .. } => Provenance::Lemma1,
            ThresholdRule::Fixed { .. } => {
                return Err(Error::arg("rule", "a fixed cutoff has no tail function"))
            }
        };
        let points = grid
            .iter()
            .map(|&l| Ok((l, rule.bound(l)?.expect("bounded"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, provenance)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Right-continuous step interpolation: the value at the last tabulated
    /// `λ` not exceeding `x`, or 1 before the first point.
    pub fn evaluate(&self, x: f64) -> f64 {
        match self.points.partition_point(|&(l, _)| l <= x) {
            0 => 1.0,
            i => self.points[i - 1].1,
        }
    }

    /// Smallest tabulated `λ` with `F(λ) ≤ 1 - α`, or `+∞` if none.
    pub fn cutoff(&self, alpha: f64) -> f64 {
        let target = 1.0 - alpha + 1e-12;
        self.points
            .iter()
            .find(|&&(_, f)| f <= target)
            .map_or(f64::INFINITY, |&(l, _)| l)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,F\n");
        for (l, f) in &self.points {
            out.push_str(&format!("{l},{f}\n"));
        }
        out
    }
}

/// Support interval of a named observable under both cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableComparison {
    pub name: String,
    pub inner: (f64, f64),
    pub outer: (f64, f64),
}

/// Regions from the chi-squared cutoff (too small to be trusted) and from a
/// rigorous bound (valid but possibly too large). When the two are close,
/// the choice of cutoff does not matter for the conclusions drawn.
#[derive(Debug, Clone, Serialize)]
pub struct InnerOuterReport {
    pub alpha: f64,
    pub inner_rule: ThresholdRule,
    pub outer_rule: ThresholdRule,
    pub inner_lambda: f64,
    pub outer_lambda: f64,
    pub intervals: Vec<ObservableComparison>,
    pub inner_volume: f64,
    pub outer_volume: f64,
    /// `outer_volume / inner_volume`.
    pub volume_ratio: f64,
    pub volume_samples: usize,
}

/// Compares the chi-squared region with the region for `outer_rule`:
/// cutoffs, support intervals of `observables` and Monte Carlo volumes.
pub fn inner_outer_test(
    dataset: &TomographyDataset,
    alpha: f64,
    outer_rule: &ThresholdRule,
    observables: &[(String, CMatrix)],
    volume_samples: usize,
    seed: u64,
    options: &MleOptions,
) -> Result<InnerOuterReport> {
    let inner_rule = ThresholdRule::ChiSquare {
        k: degrees_of_freedom(dataset)?,
    };
    let outer = RegionSpec::new(dataset.clone(), alpha, *outer_rule, options)?;
    let inner = RegionSpec::with_mle(dataset.clone(), alpha, inner_rule, outer.mle().clone(), options)?;
    let intervals = observables
        .iter()
        .map(|(name, x)| {
            let i = inner.support_interval(x)?;
            let o = outer.support_interval(x)?;
            Ok(ObservableComparison {
                name: name.clone(),
                inner: (i.min, i.max),
                outer: (o.min, o.max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let inner_volume = inner.volume_fraction(volume_samples, seed);
    let outer_volume = outer.volume_fraction(volume_samples, seed);
    let volume_ratio = if inner_volume > 0.0 {
        outer_volume / inner_volume
    } else {
        f64::INFINITY
    };
    Ok(InnerOuterReport {
        alpha,
        inner_rule,
        outer_rule: *outer_rule,
        inner_lambda: inner.lambda_alpha(),
        outer_lambda: outer.lambda_alpha(),
        intervals,
        inner_volume,
        outer_volume,
        volume_ratio,
        volume_samples,
    })
}
