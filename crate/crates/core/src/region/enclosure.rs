//! Explicit enclosures of point sets: minimum-volume ellipsoids and
//! minimum enclosing balls.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

/// Relative singular-value cutoff for the affine hull of a point set.
const HULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnclosureKind {
    /// `{x : (x - c)ᵀ A (x - c) ≤ 1}` within the affine hull.
    Ellipsoid { center: Vec<f64>, shape: Vec<Vec<f64>> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// An ellipsoid or ball containing a set of points.
///
/// When the points span an affine subspace of dimension `rank` below the
/// ambient dimension, the enclosure lives in that subspace: `shape` is
/// singular and containment additionally requires lying in the hull.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enclosure {
    #[serde(flatten)]
    pub kind: EnclosureKind,
    pub sample_count: usize,
    pub rank: usize,
    #[serde(skip)]
    hull: DMatrix<f64>,
}

impl Enclosure {
    pub fn center(&self) -> &[f64] {
        match &self.kind {
            EnclosureKind::Ellipsoid { center, .. } | EnclosureKind::Ball { center, .. } => center,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.center().len()
    }

    /// Distance of `x` from the affine hull the enclosure lives in.
    fn hull_distance(&self, x: &DVector<f64>) -> f64 {
        let c = DVector::from_column_slice(self.center());
        let v = x - &c;
        let inside = &self.hull * (self.hull.transpose() * &v);
        (v - inside).norm()
    }

    /// The enclosure's defining quantity at `x`: the ellipsoid quadratic
    /// form, or `|x - c| / r` for a ball. At most 1 inside.
    pub fn level(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        let c = DVector::from_column_slice(self.center());
        let v = &x - &c;
        match &self.kind {
            EnclosureKind::Ellipsoid { shape, .. } => {
                let a = matrix_from_rows(shape);
                (v.transpose() * a * &v)[(0, 0)]
            }
            EnclosureKind::Ball { radius, .. } => {
                if *radius > 0.0 {
                    v.norm() / radius
                } else if v.norm() == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Containment with absolute slack `tol` on the level and on the
    /// distance from the hull.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let v = DVector::from_column_slice(x);
        if self.hull_distance(&v) > tol {
            return false;
        }
        match &self.kind {
            EnclosureKind::Ball { center, radius } => {
                let c = DVector::from_column_slice(center);
                (v - c).norm() <= radius + tol
            }
            EnclosureKind::Ellipsoid { .. } => self.level(x) <= 1.0 + tol,
        }
    }

    /// Volume within the hull, relative to the unit ball of dimension `rank`.
    pub fn relative_volume(&self) -> f64 {
        match &self.kind {
            EnclosureKind::Ball { radius, .. } => radius.powi(self.rank as i32),
            EnclosureKind::Ellipsoid { shape, .. } => {
                if self.rank == 0 {
                    return 0.0;
                }
                let a = matrix_from_rows(shape);
                let reduced = self.hull.transpose() * a * &self.hull;
                1.0 / reduced.determinant().sqrt()
            }
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::arg("points", "need at least one point"))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::arg("points", "points must have at least one coordinate"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::arg("points", "coordinates must be finite"));
    }
    Ok(n)
}

/// Mean and an orthonormal basis (columns) of the affine hull.
fn affine_hull(points: &[Vec<f64>], n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let m = points.len();
    let mean = points
        .iter()
        .fold(DVector::zeros(n), |acc, p| acc + DVector::from_column_slice(p))
        / m as f64;
    let centered = DMatrix::from_fn(n, m, |i, j| points[j][i] - mean[i]);
    let scale = centered.abs().max();
    if scale == 0.0 {
        return (mean, DMatrix::zeros(n, 0));
    }
    let svd = centered.svd(true, false);
    let u = svd.u.expect("requested");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > HULL_TOL * top.max(scale))
        .collect();
    let basis = DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])]);
    (mean, basis)
}

/// Minimum-volume enclosing ellipsoid (Khachiyan iteration with
/// Todd-Yildirim away steps), followed by a rescale so that every point
/// satisfies the inequality. The volume exceeds the optimum by at most a
/// factor `1 + epsilon`.
pub fn minimum_volume_ellipsoid(points: &[Vec<f64>], epsilon: f64) -> Result<Enclosure> {
    let n = check_points(points)?;
    if !(epsilon > 0.0) {
        return Err(Error::arg("epsilon", "must be > 0"));
    }
    let (mean, hull) = affine_hull(points, n);
    let r = hull.ncols();
    if r == 0 {
        return Ok(Enclosure {
            kind: EnclosureKind::Ellipsoid {
                center: mean.iter().copied().collect(),
                shape: vec![vec![0.0; n]; n],
            },
            sample_count: points.len(),
            rank: 0,
            hull,
        });
    }
    let reduced: Vec<DVector<f64>> = points
        .iter()
        .map(|p| hull.transpose() * (DVector::from_column_slice(p) - &mean))
        .collect();
    let (center_r, shape_r) = khachiyan(&reduced, epsilon)?;

    let center = &mean + &hull * &center_r;
    let shape = &hull * shape_r * hull.transpose();
    Ok(Enclosure {
        kind: EnclosureKind::Ellipsoid {
            center: center.iter().copied().collect(),
            shape: rows_of(&shape),
        },
        sample_count: points.len(),
        rank: r,
        hull,
    })
}

fn khachiyan(points: &[DVector<f64>], epsilon: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = points[0].len();
    let m = points.len();
    let lifted: Vec<DVector<f64>> = points.iter().map(|p| p.push(1.0)).collect();
    let dim = (n + 1) as f64;
    // (1+δ)^((n+1)/2) = 1 + ε bounds the volume excess
    let delta = (1.0 + epsilon).powf(2.0 / dim) - 1.0;
    let mut u = vec![1.0 / m as f64; m];
    let max_iter = 100_000 + 1000 * m;
    let mut converged = false;
    for _ in 0..max_iter {
        let mut big_m = DMatrix::<f64>::zeros(n + 1, n + 1);
        for (q, &w) in lifted.iter().zip(&u) {
            if w > 0.0 {
                big_m += q * q.transpose() * w;
            }
        }
        let inv = big_m
            .try_inverse()
            .ok_or_else(|| Error::NonConvergence("singular moment matrix in ellipsoid fit".into()))?;
        let kappa: Vec<f64> = lifted
            .iter()
            .map(|q| (q.transpose() * &inv * q)[(0, 0)])
            .collect();
        let (j_up, k_up) = kappa
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        let (j_down, k_down) = kappa
            .iter()
            .copied()
            .enumerate()
            .filter(|&(i, _)| u[i] > 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("support non-empty");
        if k_up <= (1.0 + delta) * dim && k_down >= (1.0 - delta) * dim {
            converged = true;
            break;
        }
        if k_up - dim >= dim - k_down {
            let step = (k_up - dim) / (dim * (k_up - 1.0));
            for w in u.iter_mut() {
                *w *= 1.0 - step;
            }
            u[j_up] += step;
        } else {
            let wj = u[j_down];
            let step = ((dim - k_down) / (dim * (k_down - 1.0))).min(wj / (1.0 - wj));
            for w in u.iter_mut() {
                *w *= 1.0 + step;
            }
            u[j_down] = if step >= wj / (1.0 - wj) { 0.0 } else { u[j_down] - step };
        }
    }
    if !converged {
        return Err(Error::NonConvergence("ellipsoid iteration cap reached".into()));
    }
    let center = points
        .iter()
        .zip(&u)
        .fold(DVector::zeros(n), |acc, (p, &w)| acc + p * w);
    let mut scatter = DMatrix::<f64>::zeros(n, n);
    for (p, &w) in points.iter().zip(&u) {
        let v = p - &center;
        scatter += &v * v.transpose() * w;
    }
    let mut shape = scatter
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence("degenerate scatter in ellipsoid fit".into()))?
        / n as f64;
    let worst = points
        .iter()
        .map(|p| {
            let v = p - &center;
            (v.transpose() * &shape * &v)[(0, 0)]
        })
        .fold(0.0, f64::max);
    if worst > 0.0 {
        shape /= worst;
    }
    Ok((center, shape))
}

/// Smallest ball containing every point (Welzl's move-to-front variant,
/// exact up to rounding).
pub fn minimum_enclosing_ball(points: &[Vec<f64>]) -> Result<Enclosure> {
    let n = check_points(points)?;
    let (_, hull) = affine_hull(points, n);
    let pts: Vec<DVector<f64>> = points.iter().map(|p| DVector::from_column_slice(p)).collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    let mut boundary = Vec::with_capacity(n + 1);
    let (center, radius) = move_to_front(&pts, &mut order, pts.len(), &mut boundary, n);
    // rounding in the circumsphere solve can leave points a hair outside
    let radius = pts.iter().map(|p| (p - &center).norm()).fold(radius, f64::max);
    Ok(Enclosure {
        kind: EnclosureKind::Ball {
            center: center.iter().copied().collect(),
            radius,
        },
        sample_count: points.len(),
        rank: hull.ncols(),
        hull,
    })
}

fn move_to_front(
    pts: &[DVector<f64>],
    order: &mut Vec<usize>,
    end: usize,
    boundary: &mut Vec<usize>,
    n: usize,
) -> (DVector<f64>, f64) {
    let (mut center, mut radius) = circumsphere(pts, boundary, n);
    if boundary.len() == n + 1 {
        return (center, radius);
    }
    for i in 0..end {
        let idx = order[i];
        if (&pts[idx] - &center).norm() > radius * (1.0 + 1e-12) + 1e-15 {
            boundary.push(idx);
            let (c, r) = move_to_front(pts, order, i, boundary, n);
            boundary.pop();
            center = c;
            radius = r;
            order[..=i].rotate_right(1);
        }
    }
    (center, radius)
}

/// Smallest sphere through the given points, centered in their affine hull.
fn circumsphere(pts: &[DVector<f64>], support: &[usize], n: usize) -> (DVector<f64>, f64) {
    let Some((&first, rest)) = support.split_first() else {
        return (DVector::zeros(n), -1.0);
    };
    let p0 = &pts[first];
    if rest.is_empty() {
        return (p0.clone(), 0.0);
    }
    let k = rest.len();
    let diffs = DMatrix::from_fn(n, k, |i, j| pts[rest[j]][i] - p0[i]);
    let gram = diffs.transpose() * &diffs * 2.0;
    let rhs = DVector::from_fn(k, |j, _| diffs.column(j).norm_squared());
    let coef = gram
        .clone()
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| gram.pseudo_inverse(1e-14).expect("svd") * &rhs);
    let center = p0 + diffs * coef;
    let radius = (&center - p0).norm();
    (center, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::fibonacci_sphere;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axes() -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for i in 0..3 {
            for s in [1.0, -1.0] {
                let mut p = vec![0.0; 3];
                p[i] = s;
                pts.push(p);
            }
        }
        pts
    }

    #[test]
    fn ellipsoid_of_axes_is_unit_ball() {
        let e = minimum_volume_ellipsoid(&axes(), 1e-7).unwrap();
        assert_eq!(e.rank, 3);
        for c in e.center() {
            assert!(c.abs() < 1e-6);
        }
        let EnclosureKind::Ellipsoid { shape, .. } = &e.kind else { panic!() };
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((shape[i][j] - want).abs() < 1e-6, "{shape:?}");
            }
        }
    }

    #[test]
    fn ellipsoid_recovers_axis_aligned_surface() {
        let (a, b, c) = (0.5, 0.2, 0.9);
        let pts: Vec<Vec<f64>> = fibonacci_sphere(400)
            .into_iter()
            .map(|p| vec![0.1 + a * p[0], -0.3 + b * p[1], 0.2 + c * p[2]])
            .collect();
        let e = minimum_volume_ellipsoid(&pts, 1e-8).unwrap();
        let EnclosureKind::Ellipsoid { shape, center } = &e.kind else { panic!() };
        let want = [1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c)];
        for i in 0..3 {
            assert!((shape[i][i] - want[i]).abs() <= 1e-3 * want[i], "{shape:?}");
            for j in 0..3 {
                if i != j {
                    assert!(shape[i][j].abs() <= 1e-3 * want[i]);
                }
            }
        }
        assert!((center[0] - 0.1).abs() < 1e-4 && (center[1] + 0.3).abs() < 1e-4);
        for p in &pts {
            assert!(e.contains(p, 1e-8));
        }
    }

    #[test]
    fn ellipsoid_degenerate_sets() {
        let same = vec![vec![0.2, 0.1, -0.3]; 5];
        let e = minimum_volume_ellipsoid(&same, 1e-6).unwrap();
        assert_eq!(e.rank, 0);
        assert_eq!(e.relative_volume(), 0.0);
        assert!(e.contains(&same[0], 1e-12));
        assert!(!e.contains(&[0.0, 0.0, 0.0], 1e-12));

        let planar = vec![vec![1.0, 0.0, 0.5], vec![-1.0, 0.0, 0.5], vec![0.0, 2.0, 0.5], vec![0.0, -2.0, 0.5]];
        let e = minimum_volume_ellipsoid(&planar, 1e-8).unwrap();
        assert_eq!(e.rank, 2);
        for p in &planar {
            assert!(e.contains(p, 1e-8));
        }
        assert!((e.relative_volume() - 2.0).abs() < 1e-5);
        assert!(!e.contains(&[0.0, 0.0, 0.6], 1e-8));
    }

    #[test]
    fn ellipsoid_near_optimal_against_ball() {
        // the ball is an enclosing ellipsoid, so the fitted volume cannot exceed it by more than ε
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let e = minimum_volume_ellipsoid(&pts, 1e-3).unwrap();
            let b = minimum_enclosing_ball(&pts).unwrap();
            assert!(e.relative_volume() <= (1.0 + 1e-3) * b.relative_volume());
            assert!(pts.iter().all(|p| e.contains(p, 1e-9)));
        }
    }

    #[test]
    fn ball_examples() {
        let b = minimum_enclosing_ball(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let EnclosureKind::Ball { center, radius } = &b.kind else { panic!() };
        assert!(center.iter().all(|c| c.abs() < 1e-15));
        assert!((radius - 1.0).abs() < 1e-15);
        assert_eq!(b.rank, 1);

        let b = minimum_enclosing_ball(&[vec![0.3, 0.4, 0.5]]).unwrap();
        let EnclosureKind::Ball { radius, .. } = &b.kind else { panic!() };
        assert_eq!(*radius, 0.0);

        let b = minimum_enclosing_ball(&axes()).unwrap();
        let EnclosureKind::Ball { radius, .. } = &b.kind else { panic!() };
        assert!((radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_is_tight_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let n = 2 + trial % 3;
            let pts: Vec<Vec<f64>> = (0..5 + trial).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let b = minimum_enclosing_ball(&pts).unwrap();
            let EnclosureKind::Ball { center, radius } = &b.kind else { panic!() };
            let dist = |p: &Vec<f64>| p.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            assert!(pts.iter().all(|p| dist(p) <= *radius));
            assert!(pts.iter().any(|p| dist(p) > radius - 1e-6));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(minimum_enclosing_ball(&[]).is_err());
        assert!(minimum_volume_ellipsoid(&[vec![0.0], vec![1.0, 2.0]], 0.1).is_err());
        assert!(minimum_volume_ellipsoid(&axes(), 0.0).is_err());
    }
}
