//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lrtomo::dataset::{pauli_setting, pauli_settings};
use lrtomo::likelihood::LogLikelihoodFn;
use lrtomo::region::RegionSpec;
use lrtomo::sampling::{hilbert_schmidt_state, qubit_state_grid, sphere_directions};
use lrtomo::state::{pauli_matrices, CMatrix, Complex64};
use lrtomo::studies::{
    always_everything, coverage_mc_with_cache, lr_assignment, naive_ellipsoid_baseline, perturbed_pr_challenger,
    pr_assignment, pr_optimality_check, random_challenger, DiscreteModel, ExhaustiveEnsemble, MleCache, DEFAULT_CAP,
};
use lrtomo::threshold::{chi2_ccdf, eq9_bound, solve_threshold, ThresholdRule};
use lrtomo::{lambda, mle, BlochVector, DensityMatrix, MleOptions, TomographyDataset};

fn verdict(id: u32, what: &str, pass: bool, elapsed: Duration, detail: &str) {
    println!(
        "criterion {id} [{}] {what} ({:.2?}): {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn bundled_dataset() -> TomographyDataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/fig1.json");
    TomographyDataset::load(path).expect("bundled dataset")
}

fn pauli_plan(shots: u64) -> Vec<(lrtomo::Povm, u64)> {
    pauli_settings().into_iter().map(|p| (p, shots)).collect()
}

#[test]
fn criterion_1_golden_path() {
    let t = Instant::now();
    let ds = bundled_dataset();
    let m = mle(&ds, &MleOptions::default()).unwrap();
    let l = lambda(&ds, &DensityMatrix::maximally_mixed(2), Some(&m)).unwrap();
    let elapsed = t.elapsed();
    let b = m.rho_mle.bloch();
    let err = b
        .components()
        .iter()
        .zip([-0.3, -0.1, -0.7])
        .map(|(a, w)| (a - w).abs())
        .fold(0.0, f64::max);
    let pass = m.converged && err <= 1e-6 && (l - 12.8459).abs() <= 1e-3 && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "bundled dataset MLE and λ(I/2)",
        pass,
        elapsed,
        &format!("MLE {:?} (max error {err:.2e}), λ(I/2) = {l:.6}", b.components()),
    );
}

#[test]
fn criterion_2_threshold_table() {
    let t = Instant::now();
    let chi = solve_threshold(&ThresholdRule::ChiSquare { k: 3 }, 0.9).unwrap();
    let lem = solve_threshold(&ThresholdRule::Lemma1 { copies: 60, dim: 2 }, 0.9).unwrap();
    let eq9 = solve_threshold(&ThresholdRule::Eq9Bound { k: 3 }, 0.9).unwrap();
    let elapsed = t.elapsed();
    let pass = (chi - 6.2514).abs() <= 1e-3
        && (lem - 29.1712).abs() <= 1e-3
        && chi < eq9
        && eq9 < lem
        && elapsed < Duration::from_millis(100);
    verdict(
        2,
        "threshold table",
        pass,
        elapsed,
        &format!("chi2 {chi:.6}, eq9 {eq9:.6}, lemma1 {lem:.6}"),
    );
}

#[test]
fn criterion_3_bound_ordering() {
    let t = Instant::now();
    let ensemble = ExhaustiveEnsemble::new(&pauli_plan(10), DEFAULT_CAP, &MleOptions::default()).unwrap();
    let grid = qubit_state_grid(13);
    assert_eq!(grid.len(), 20);
    let curves: Vec<_> = grid.iter().map(|s| ensemble.ccdf(s).unwrap()).collect();
    let lambdas: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
    let mut worst_margin = f64::INFINITY;
    let mut worst_at = 0.0;
    let mut states_above = 0;
    let mut states_below = 0;
    for c in &curves {
        let mut above = false;
        let mut below = false;
        for &l in &lambdas {
            let f = c.evaluate(l);
            let margin = eq9_bound(3, l).unwrap() - f;
            if margin < worst_margin {
                worst_margin = margin;
                worst_at = l;
            }
            if l > 0.0 {
                let chi = chi2_ccdf(3, l).unwrap();
                above |= f > chi;
                below |= f < chi;
            }
        }
        states_above += above as usize;
        states_below += below as usize;
    }
    let elapsed = t.elapsed();
    let pass = worst_margin >= 0.0 && states_above >= 1 && states_below >= 1 && elapsed < Duration::from_secs(600);
    verdict(
        3,
        "exhaustive CCDF below the multinomial bound and crossing chi-squared",
        pass,
        elapsed,
        &format!(
            "{} datasets, min(bound - F) = {worst_margin:.3e} at λ = {worst_at}; states above chi2 somewhere: {states_above}, below somewhere: {states_below}",
            ensemble.len()
        ),
    );
}

#[test]
fn criterion_4_coverage() {
    let t = Instant::now();
    let plan = pauli_plan(20);
    let grid = qubit_state_grid(13);
    let cache = MleCache::new(MleOptions::default());
    let alpha = 0.9;
    let trials = 10_000;
    let mut eq9_ok = true;
    let mut eq9_worst = (f64::INFINITY, 0.0);
    let mut chi_low = Vec::new();
    let mut failures = 0;
    for (i, rho) in grid.iter().enumerate() {
        let seed = 1000 + i as u64;
        let r = coverage_mc_with_cache(rho, &plan, &ThresholdRule::Eq9Bound { k: 3 }, alpha, trials, seed, &cache).unwrap();
        let slack = alpha - 3.0 * r.half_width();
        eq9_ok &= r.coverage >= slack;
        if r.coverage - slack < eq9_worst.0 - eq9_worst.1 {
            eq9_worst = (r.coverage, slack);
        }
        failures += r.solver_failures;
        let c = coverage_mc_with_cache(rho, &plan, &ThresholdRule::ChiSquare { k: 3 }, alpha, trials, seed, &cache).unwrap();
        failures += c.solver_failures;
        if c.coverage < alpha - c.half_width() {
            chi_low.push((i, c.coverage, c.bloch.clone()));
        }
    }
    let elapsed = t.elapsed();
    println!(
        "chi2 rule: {} of {} states below 0.9 by more than one Wilson half-width{}",
        chi_low.len(),
        grid.len(),
        if chi_low.is_empty() {
            " (none found at N = 60)".to_string()
        } else {
            format!(": {chi_low:?}")
        }
    );
    let pass = eq9_ok && failures == 0 && elapsed < Duration::from_secs(1800);
    verdict(
        4,
        "multinomial-bound cutoff covers every grid state",
        pass,
        elapsed,
        &format!(
            "worst eq9 coverage {:.4} vs floor {:.4}; solver failures {failures}; {} distinct datasets solved",
            eq9_worst.0,
            eq9_worst.1,
            cache.len()
        ),
    );
}

#[test]
fn criterion_5_state_dependent_cutoff() {
    let t = Instant::now();
    let plan = vec![(pauli_setting("z").unwrap(), 60)];
    let ensemble = ExhaustiveEnsemble::new(&plan, DEFAULT_CAP, &MleOptions::default()).unwrap();
    let chi = solve_threshold(&ThresholdRule::ChiSquare { k: 1 }, 0.9).unwrap();
    let eq9 = solve_threshold(&ThresholdRule::Eq9Bound { k: 1 }, 0.9).unwrap();
    let cutoffs: Vec<(f64, f64)> = lrtomo::sampling::linspace_unit(21)
        .into_iter()
        .map(|z| {
            let rho = DensityMatrix::from_bloch(&BlochVector::new(vec![0.0, 0.0, z])).unwrap();
            (z, ensemble.cutoff(&rho, 0.9).unwrap())
        })
        .collect();
    let elapsed = t.elapsed();
    let above = cutoffs.iter().filter(|c| c.1 > chi).count();
    let below = cutoffs.iter().filter(|c| c.1 < chi).count();
    let max = cutoffs.iter().map(|c| c.1).fold(0.0, f64::max);
    let pass = above >= 1 && below >= 1 && max <= eq9 && elapsed < Duration::from_secs(60);
    verdict(
        5,
        "state-dependent cutoff for a 60-flip coin",
        pass,
        elapsed,
        &format!("{above} above and {below} below chi2_1 = {chi:.4}; max {max:.4} ≤ eq9_1 = {eq9:.4}"),
    );
}

#[test]
fn criterion_6_pr_optimality() {
    let t = Instant::now();
    let alpha = 0.9;
    let base = DiscreteModel::coin(21, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let random_volume: Vec<f64> = (0..21).map(|_| rng.random_range(0.1..2.0)).collect();
    let mut summary = Vec::new();
    let mut pass = true;
    for (label, model) in [
        ("uniform", base.clone()),
        ("random", base.clone().with_volume(random_volume).unwrap()),
    ] {
        let pr = pr_assignment(&model, alpha).unwrap();
        let exact = (0..21).all(|i| pr.coverage(&model, i) >= alpha);
        let mut beaten = 0;
        let mut best_margin = f64::INFINITY;
        let mut challengers = vec![always_everything(&model), lr_assignment(&model, alpha).unwrap().0];
        for k in 0..50 {
            challengers.push(if k % 2 == 0 {
                random_challenger(&model, alpha, &mut rng)
            } else {
                perturbed_pr_challenger(&model, alpha, 0.5, &mut rng)
            });
        }
        for c in &challengers {
            let cmp = pr_optimality_check(&model, alpha, c).unwrap();
            beaten += (!cmp.pr_not_worse) as usize;
            best_margin = best_margin.min(cmp.challenger_volume - cmp.pr_volume);
        }
        // the likelihood-ratio estimator against probability ratios for its own averaging measure
        let lr_measure = model.clone().with_marginal(model.lr_marginal()).unwrap();
        let (lr, cut) = lr_assignment(&lr_measure, alpha).unwrap();
        let lr_cmp = pr_optimality_check(&lr_measure, alpha, &lr).unwrap();
        pass &= exact && beaten == 0 && lr_cmp.pr_not_worse;
        summary.push(format!(
            "{label} volume: exact coverage {exact}, beaten by {beaten}/{} (closest margin {best_margin:.3e}); LR cutoff {cut:.4} ⟨V⟩ {:.6} vs PR {:.6}",
            challengers.len(),
            lr_cmp.challenger_volume,
            lr_cmp.pr_volume
        ));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    verdict(6, "probability-ratio estimator is never beaten", pass, elapsed, &summary.join("; "));
}

fn random_traceless(rng: &mut ChaCha8Rng) -> CMatrix {
    let mut h = CMatrix::from_fn(2, 2, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    h = (&h + h.adjoint()).scale(0.5);
    let tr = h.trace().re / 2.0;
    h[(0, 0)].re -= tr;
    h[(1, 1)].re -= tr;
    h
}

#[test]
fn criterion_7_property_suites() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = MleOptions::default();
    let mut notes = Vec::new();

    // λ ≥ 0 on 10 random datasets × 1000 states
    let mut min_lambda = f64::INFINITY;
    for _ in 0..10 {
        let counts = [0, 1, 2].map(|_| {
            let a = rng.random_range(0..=20);
            (a, 20 - a)
        });
        let ds = TomographyDataset::pauli_counts(counts);
        let m = mle(&ds, &opts).unwrap();
        for _ in 0..1000 {
            let rho = hilbert_schmidt_state(&mut rng, 2);
            min_lambda = min_lambda.min(lambda(&ds, &rho, Some(&m)).unwrap());
        }
    }
    let nonneg = min_lambda >= 0.0;
    notes.push(format!("min λ {min_lambda:.3e}"));

    // convexity of λ at midpoints
    let ds = bundled_dataset();
    let m = mle(&ds, &opts).unwrap();
    let mut convex = true;
    for _ in 0..1000 {
        let a = hilbert_schmidt_state(&mut rng, 2);
        let b = hilbert_schmidt_state(&mut rng, 2);
        let mid = a.mix(&b, 0.5).unwrap();
        let la = lambda(&ds, &a, Some(&m)).unwrap();
        let lb = lambda(&ds, &b, Some(&m)).unwrap();
        convex &= lambda(&ds, &mid, Some(&m)).unwrap() <= 0.5 * (la + lb) + 1e-9;
    }

    // gradient against central differences
    let f = LogLikelihoodFn::new(&ds);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..10 {
        let v: Vec<f64> = loop {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-0.8..0.8)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() < 0.64 {
                break v;
            }
        };
        let rho = DensityMatrix::from_bloch(&BlochVector::new(v)).unwrap();
        let g = f.gradient(&rho).unwrap();
        for _ in 0..20 {
            let h = random_traceless(&mut rng);
            let analytic = lrtomo::state::trace_product(&g, &h);
            let eps = 1e-6;
            let plus = DensityMatrix::new(rho.matrix() + h.scale(eps)).unwrap();
            let minus = DensityMatrix::new(rho.matrix() - h.scale(eps)).unwrap();
            let numeric = (f.log_likelihood(&plus).unwrap() - f.log_likelihood(&minus).unwrap()) / (2.0 * eps);
            worst_rel = worst_rel.max((analytic - numeric).abs() / analytic.abs().max(1.0));
        }
    }
    let gradient_ok = worst_rel <= 1e-5;
    notes.push(format!("gradient rel. error {worst_rel:.2e}"));

    // support-interval consistency and region monotonicity in α
    let region = RegionSpec::new(ds.clone(), 0.9, ThresholdRule::ChiSquare { k: 3 }, &opts).unwrap();
    let mut consistency: f64 = 0.0;
    for x in pauli_matrices().into_iter().chain([random_traceless(&mut rng)]) {
        let s = region.support_interval(&x).unwrap();
        let n = region.support_interval(&(-x)).unwrap();
        consistency = consistency.max((s.min + n.max).abs()).max((s.max + n.min).abs());
    }
    notes.push(format!("support consistency {consistency:.1e}"));
    let small = RegionSpec::new(ds.clone(), 0.8, ThresholdRule::ChiSquare { k: 3 }, &opts).unwrap();
    let mut monotone = true;
    for _ in 0..1000 {
        let rho = hilbert_schmidt_state(&mut rng, 2);
        monotone &= !small.contains(&rho).unwrap() || region.contains(&rho).unwrap();
    }

    // enclosures contain every sample they were built from
    let (ellipsoid, samples) = region.bounding_ellipsoid(200, 1e-4).unwrap();
    let (ball, _) = region.bounding_ball(200).unwrap();
    let contained = samples
        .iter()
        .all(|b| ellipsoid.contains(&b.point, 1e-8) && ball.contains(&b.point, 1e-8));
    let boundary_ok = samples.iter().all(|b| b.clipped || (b.lambda - region.lambda_alpha()).abs() <= 1e-8);

    let elapsed = t.elapsed();
    let pass = nonneg
        && convex
        && gradient_ok
        && consistency <= 1e-9
        && monotone
        && contained
        && boundary_ok
        && elapsed < Duration::from_secs(300);
    notes.push(format!(
        "convex {convex}, monotone {monotone}, enclosures contain {} samples {contained}, boundary λ ok {boundary_ok}",
        samples.len()
    ));
    verdict(7, "property suites", pass, elapsed, &notes.join("; "));
}

#[test]
fn criterion_8_volume_comparison() {
    let t = Instant::now();
    let r = naive_ellipsoid_baseline(&bundled_dataset(), 0.9, 2000, 8).unwrap();
    let elapsed = t.elapsed();
    let pass = r.lr_volume <= r.ellipsoid_volume_clipped && r.solver_failures == 0;
    verdict(
        8,
        "likelihood-ratio region smaller than the calibrated error ellipsoid",
        pass,
        elapsed,
        &format!(
            "LR volume {:.5} (cutoff {:.4}) vs ellipsoid {:.5} clipped / {:.5} unclipped (radius {:.3}σ)",
            r.lr_volume, r.lr_cutoff, r.ellipsoid_volume_clipped, r.ellipsoid_volume, r.radius
        ),
    );
}

#[test]
fn sphere_directions_used_for_enclosures_cover_the_sphere() {
    let d = sphere_directions(3, 200);
    let mean: Vec<f64> = (0..3).map(|i| d.iter().map(|v| v[i]).sum::<f64>() / 200.0).collect();
    assert!(mean.iter().all(|m| m.abs() < 0.02));
}
