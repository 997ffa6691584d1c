//! Likelihood-ratio region for the bundled three-Pauli dataset.
//!
//! ```text
//! cargo run --release --example fig1_region [alpha]
//! ```

use lrtomo::region::RegionSpec;
use lrtomo::state::pauli_matrices;
use lrtomo::threshold::RuleKind;
use lrtomo::{lambda, DensityMatrix, MleOptions, ThresholdRule, TomographyDataset};

fn main() -> lrtomo::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map_or(0.9, |a| a.parse().expect("alpha"));
    let ds = TomographyDataset::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fig1.json"))?;
    let opts = MleOptions::default();

    for kind in [RuleKind::Chi2, RuleKind::Eq9, RuleKind::Lemma1] {
        let rule = ThresholdRule::for_dataset(kind, &ds)?;
        let region = RegionSpec::new(ds.clone(), alpha, rule, &opts)?;
        println!("{rule}: λ_α = {:.4}", region.lambda_alpha());
        if kind == RuleKind::Chi2 {
            let mle = region.mle();
            println!("  MLE Bloch vector {:.6?}", mle.rho_mle.bloch().components());
            let mixed = lambda(&ds, &DensityMatrix::maximally_mixed(2), Some(mle))?;
            println!("  λ(I/2) = {mixed:.4}, inside: {}", mixed <= region.lambda_alpha());
        }
        for (name, x) in ["x", "y", "z"].iter().zip(pauli_matrices()) {
            let s = region.support_interval(&x)?;
            let edge = if s.min_detail.physicality_limited || s.max_detail.physicality_limited {
                " (touches the state-space boundary)"
            } else {
                ""
            };
            println!("  ⟨σ_{name}⟩ ∈ [{:+.4}, {:+.4}]{edge}", s.min, s.max);
        }
    }
    Ok(())
}
