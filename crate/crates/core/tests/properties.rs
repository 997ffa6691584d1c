use std::path::PathBuf;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lrtomo::dataset::{born_probabilities, pauli_settings};
use lrtomo::region::{minimum_enclosing_ball, minimum_volume_ellipsoid, RegionSpec};
use lrtomo::sampling::hilbert_schmidt_state;
use lrtomo::state::gell_mann_basis;
use lrtomo::studies::{coverage_mc, pr_assignment, wilson_interval, DiscreteModel, Z95};
use lrtomo::threshold::{chi2_ccdf, eq9_bound, lemma1_bound};
use lrtomo::{
    bloch_to_state, mle, simulate_dataset, solve_threshold, state_to_bloch, BlochVector, DensityMatrix,
    LogLikelihoodFn, MleOptions, ThresholdRule, TomographyDataset,
};

fn bundled() -> TomographyDataset {
    TomographyDataset::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/fig1.json")).unwrap()
}

fn state(seed: u64, dim: usize) -> DensityMatrix {
    hilbert_schmidt_state(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

fn pauli_plan(shots: u64) -> Vec<(lrtomo::Povm, u64)> {
    pauli_settings().into_iter().map(|p| (p, shots)).collect()
}

fn heavy() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #[test]
    fn bloch_round_trip_from_vectors(v in prop::collection::vec(-0.5f64..0.5, 3)) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm <= 1.0);
        let m = bloch_to_state(&BlochVector::new(v.clone()), 2).unwrap();
        let back = state_to_bloch(&m);
        for (a, b) in back.components().iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn bloch_round_trip_from_states(seed in any::<u64>(), dim in 2usize..=4) {
        let rho = state(seed, dim);
        let m = bloch_to_state(&state_to_bloch(rho.matrix()), dim).unwrap();
        prop_assert!((m - rho.matrix()).iter().all(|z| z.norm() <= 1e-10));
    }

    #[test]
    fn gell_mann_basis_is_orthogonal(dim in 2usize..=4) {
        let b = gell_mann_basis(dim);
        prop_assert_eq!(b.len(), dim * dim - 1);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let t = (x * y).trace();
                let want = if i == j { 2.0 } else { 0.0 };
                prop_assert!((t.re - want).abs() < 1e-12 && t.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn born_probabilities_are_affine(s1 in any::<u64>(), s2 in any::<u64>(), w in 0.0f64..=1.0) {
        let (a, b) = (state(s1, 2), state(s2, 2));
        let mix = a.mix(&b, w).unwrap();
        for povm in pauli_settings() {
            let pa = born_probabilities(&a, &povm).unwrap();
            let pb = born_probabilities(&b, &povm).unwrap();
            let pm = born_probabilities(&mix, &povm).unwrap();
            prop_assert!((pm.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for k in 0..pm.len() {
                prop_assert!((pm[k] - (w * pa[k] + (1.0 - w) * pb[k])).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), s in any::<u64>(), shots in 1u64..200) {
        let rho = state(s, 2);
        let a = simulate_dataset(&rho, &pauli_plan(shots), seed).unwrap();
        let b = simulate_dataset(&rho, &pauli_plan(shots), seed).unwrap();
        prop_assert_eq!(a.to_json_string(), b.to_json_string());
        for setting in a.settings() {
            prop_assert_eq!(setting.counts().iter().sum::<u64>(), shots);
        }
    }

    #[test]
    fn dataset_json_round_trip(c in prop::array::uniform3((0u64..30, 0u64..30))) {
        prop_assume!(c.iter().all(|(a, b)| a + b > 0));
        let ds = TomographyDataset::pauli_counts(c);
        let back = TomographyDataset::from_json_str(&ds.to_json_string()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn tail_bounds_are_ordered_and_monotone(k in 1u32..=15, l in 0.01f64..80.0, dl in 0.0f64..5.0) {
        let c = chi2_ccdf(k, l).unwrap();
        let e = eq9_bound(k, l).unwrap();
        prop_assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&e));
        prop_assert!(c <= e);
        prop_assert!(chi2_ccdf(k, l + dl).unwrap() <= c);
        prop_assert!(eq9_bound(k, l + dl).unwrap() <= e);
        prop_assert!(lemma1_bound(60, 2, l + dl).unwrap() <= lemma1_bound(60, 2, l).unwrap());
    }

    #[test]
    fn thresholds_invert_their_bounds(k in 1u32..=15, alpha in 0.05f64..0.999) {
        for rule in [ThresholdRule::ChiSquare { k }, ThresholdRule::Eq9Bound { k }] {
            let l = solve_threshold(&rule, alpha).unwrap();
            let f = rule.bound(l).unwrap().unwrap();
            prop_assert!((f - (1.0 - alpha)).abs() < 1e-8, "{rule}: F({l}) = {f}");
        }
    }

    #[test]
    fn thresholds_increase_with_alpha(k in 1u32..=15, a in 0.05f64..0.99, b in 0.05f64..0.99, n in 1u64..10_000) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for rule in [
            ThresholdRule::ChiSquare { k },
            ThresholdRule::Eq9Bound { k },
            ThresholdRule::Lemma1 { copies: n, dim: 2 },
        ] {
            prop_assert!(solve_threshold(&rule, lo).unwrap() <= solve_threshold(&rule, hi).unwrap() + 1e-9);
        }
    }

    #[test]
    fn lemma1_threshold_grows_linearly_in_log_n(n in 2u64..1_000_000, d in 2usize..=4) {
        let a = solve_threshold(&ThresholdRule::Lemma1 { copies: n, dim: d }, 0.9).unwrap();
        let b = solve_threshold(&ThresholdRule::Lemma1 { copies: 2 * n, dim: d }, 0.9).unwrap();
        let slope = (b - a) / 2f64.ln();
        prop_assert!((slope - 2.0 * (d * d - 1) as f64).abs() < 1e-6);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let hits = (frac * trials as f64).floor() as u64;
        let (lo, hi) = wilson_interval(hits, trials, Z95);
        let p = hits as f64 / trials as f64;
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0 + 1e-12).contains(&hi));
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
    }

    #[test]
    fn pr_coverage_holds_on_random_coins(n in 2usize..25, flips in 1u64..15, alpha in 0.5f64..0.99) {
        let model = DiscreteModel::coin(n, flips).unwrap();
        let pr = pr_assignment(&model, alpha).unwrap();
        prop_assert!(pr.check_coverage(&model, alpha).is_ok());
    }

    #[test]
    fn enclosures_contain_their_points(seed in any::<u64>(), n in 4usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| lrtomo::sampling::uniform_in_ball(&mut rng, 3)).collect();
        let e = minimum_volume_ellipsoid(&pts, 1e-4).unwrap();
        let b = minimum_enclosing_ball(&pts).unwrap();
        for p in &pts {
            prop_assert!(e.contains(p, 1e-8));
            prop_assert!(b.contains(p, 1e-8));
        }
        prop_assert!(e.relative_volume() <= b.relative_volume() * (1.0 + 1e-3) + 1e-12);
    }
}

proptest! {
    #![proptest_config(heavy())]

    #[test]
    fn lambda_is_nonnegative(c in prop::array::uniform3(0u64..=20), probes in prop::collection::vec(any::<u64>(), 50)) {
        let ds = TomographyDataset::pauli_counts(c.map(|h| (h, 20 - h)));
        let m = mle(&ds, &MleOptions::default()).unwrap();
        prop_assert!(m.converged);
        for s in probes {
            prop_assert!(lrtomo::lambda(&ds, &state(s, 2), Some(&m)).unwrap() >= 0.0);
        }
    }

    #[test]
    fn loglikelihood_is_concave(s1 in any::<u64>(), s2 in any::<u64>()) {
        let f = LogLikelihoodFn::new(&bundled());
        let (a, b) = (state(s1, 2), state(s2, 2));
        let mid = a.mix(&b, 0.5).unwrap();
        let lhs = f.log_likelihood(&mid).unwrap();
        let rhs = 0.5 * (f.log_likelihood(&a).unwrap() + f.log_likelihood(&b).unwrap());
        prop_assert!(lhs >= rhs - 1e-9);
    }

    #[test]
    fn regions_are_convex_and_nested(probes in prop::collection::vec(any::<u64>(), 200)) {
        let ds = bundled();
        let opts = MleOptions::default();
        let rule = ThresholdRule::ChiSquare { k: 3 };
        let big = RegionSpec::new(ds.clone(), 0.95, rule, &opts).unwrap();
        let small = RegionSpec::with_mle(ds, 0.8, rule, big.mle().clone(), &opts).unwrap();
        let members: Vec<DensityMatrix> = probes
            .iter()
            .map(|&s| state(s, 2))
            .filter(|r| big.contains(r).unwrap())
            .collect();
        for w in members.windows(2) {
            let mid = w[0].mix(&w[1], 0.5).unwrap();
            prop_assert!(big.contains(&mid).unwrap());
        }
        for &s in &probes {
            let r = state(s, 2);
            prop_assert!(!small.contains(&r).unwrap() || big.contains(&r).unwrap());
        }
    }

    #[test]
    fn support_intervals_are_consistent(v in prop::collection::vec(-1.0f64..1.0, 3)) {
        let ds = bundled();
        let region = RegionSpec::new(ds, 0.9, ThresholdRule::Eq9Bound { k: 3 }, &MleOptions::default()).unwrap();
        let x = bloch_to_state(&BlochVector::new(v), 2).unwrap()
            - DensityMatrix::maximally_mixed(2).matrix();
        let s = region.support_interval(&x).unwrap();
        let n = region.support_interval(&(-x.clone())).unwrap();
        prop_assert!((s.min + n.max).abs() <= 1e-9);
        prop_assert!((s.max + n.min).abs() <= 1e-9);
        let at_mle = region.mle().rho_mle.expectation(&x).unwrap();
        prop_assert!(s.min <= at_mle + 1e-9 && at_mle <= s.max + 1e-9);
    }

    #[test]
    fn coverage_is_reproducible(seed in any::<u64>(), s in any::<u64>()) {
        let rho = state(s, 2);
        let rule = ThresholdRule::ChiSquare { k: 3 };
        let opts = MleOptions::default();
        let a = coverage_mc(&rho, &pauli_plan(10), &rule, 0.9, 50, seed, &opts).unwrap();
        let b = coverage_mc(&rho, &pauli_plan(10), &rule, 0.9, 50, seed, &opts).unwrap();
        prop_assert_eq!(a.hits, b.hits);
        prop_assert_eq!(a.solver_failures, 0);
    }
}
