//! The chi-squared region next to a rigorous outer region: when their
//! support intervals agree, conclusions do not depend on the cutoff.

use lrtomo::state::pauli_matrices;
use lrtomo::threshold::inner_outer_test;
use lrtomo::{MleOptions, ThresholdRule, TomographyDataset};

fn main() -> lrtomo::Result<()> {
    let ds = TomographyDataset::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fig1.json"))?;
    let observables: Vec<(String, _)> = ["sigma_x", "sigma_y", "sigma_z"]
        .iter()
        .map(|s| s.to_string())
        .zip(pauli_matrices())
        .collect();
    for outer in [ThresholdRule::Eq9Bound { k: 3 }, ThresholdRule::Lemma1 { copies: 60, dim: 2 }] {
        let r = inner_outer_test(&ds, 0.9, &outer, &observables, 100_000, 5, &MleOptions::default())?;
        println!("inner λ = {:.3}, outer ({outer}) λ = {:.3}", r.inner_lambda, r.outer_lambda);
        for c in &r.intervals {
            println!(
                "  {}: [{:+.3}, {:+.3}] ⊂ [{:+.3}, {:+.3}]",
                c.name, c.inner.0, c.inner.1, c.outer.0, c.outer.1
            );
        }
        println!("  volume ratio {:.2}", r.volume_ratio);
    }
    Ok(())
}
