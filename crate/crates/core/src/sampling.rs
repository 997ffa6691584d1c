//! Deterministic point sets and random state generators.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::state::{BlochVector, CMatrix, Complex64, DensityMatrix};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base` (the Halton sequence).
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// `n` points spread over the unit 2-sphere on a Fibonacci spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Deterministic low-discrepancy unit vectors in `dim` dimensions.
///
/// Three dimensions use the Fibonacci spiral; other dimensions map a Halton
/// sequence through Box-Muller and normalize.
pub fn sphere_directions(dim: usize, n: usize) -> Vec<Vec<f64>> {
    if dim == 3 {
        return fibonacci_sphere(n).into_iter().map(|p| p.to_vec()).collect();
    }
    let pairs = dim.div_ceil(2);
    assert!(2 * pairs <= PRIMES.len(), "dimension {dim} too large for Halton directions");
    (1..=n as u64)
        .map(|i| {
            let mut v = Vec::with_capacity(2 * pairs);
            for p in 0..pairs {
                let u1 = 1.0 - halton(i, PRIMES[2 * p]);
                let u2 = halton(i, PRIMES[2 * p + 1]);
                let r = (-2.0 * u1.ln()).sqrt();
                v.push(r * (2.0 * PI * u2).cos());
                v.push(r * (2.0 * PI * u2).sin());
            }
            v.truncate(dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// `n` low-discrepancy points in the unit 3-ball, from Halton bases 2, 3, 5.
pub fn ball_points(n: usize) -> Vec<[f64; 3]> {
    (1..=n as u64)
        .map(|i| {
            let r = halton(i, 2).cbrt();
            let z = 2.0 * halton(i, 3) - 1.0;
            let phi = 2.0 * PI * halton(i, 5);
            let s = (1.0 - z * z).max(0.0).sqrt();
            [r * s * phi.cos(), r * s * phi.sin(), r * z]
        })
        .collect()
}

/// Uniform point in the unit ball of the given dimension.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    if dim <= 4 {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                return v;
            }
        }
    }
    let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = rng.random::<f64>().powf(1.0 / dim as f64);
    g.iter().map(|x| r * x / norm).collect()
}

/// Random state from the Hilbert-Schmidt measure (`GG†/Tr GG†` for a
/// Ginibre matrix `G`). For a qubit this is uniform in the Bloch ball.
pub fn hilbert_schmidt_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let m = m.unscale(tr);
    DensityMatrix::from_trusted(crate::state::hermitian_part(&m))
}

/// Qubit states for studies: the six Pauli eigenstates, `I/2`, then
/// `interior` low-discrepancy points inside the Bloch ball.
pub fn qubit_state_grid(interior: usize) -> Vec<DensityMatrix> {
    let mut vs: Vec<[f64; 3]> = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 0.0],
    ];
    vs.extend(ball_points(interior));
    vs.into_iter()
        .map(|v| DensityMatrix::from_bloch(&BlochVector::new(v.to_vec())).expect("inside ball"))
        .collect()
}

/// `n` evenly spaced values from -1 to 1 inclusive.
pub fn linspace_unit(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                // exact endpoints and symmetric rounding
                let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                (x * 1e12).round() / 1e12
            })
            .collect(),
    }
}

/// Per-trial seed derived from a run seed (SplitMix64 finalizer).
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn directions_are_unit() {
        for dim in [2, 3, 8] {
            let ds = sphere_directions(dim, 50);
            assert_eq!(ds.len(), 50);
            for d in ds {
                let n: f64 = d.iter().map(|x| x * x).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_contains_boundary_states() {
        let g = qubit_state_grid(13);
        assert_eq!(g.len(), 20);
        assert!((g[0].bloch().norm() - 1.0).abs() < 1e-12);
        assert!(g[6].bloch().norm() < 1e-12);
        for s in &g[7..] {
            assert!(s.bloch().norm() < 1.0);
        }
    }

    #[test]
    fn hs_states_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 2..=3 {
            for _ in 0..100 {
                let s = hilbert_schmidt_state(&mut rng, d);
                assert!(DensityMatrix::new(s.matrix().clone()).is_ok());
            }
        }
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace_unit(21);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[10], 0.0);
        assert_eq!(g[20], 1.0);
        assert_eq!(g[1], -0.9);
    }
}
