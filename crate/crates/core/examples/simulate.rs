//! Simulate a dataset, save it, reload it and analyze it.

use lrtomo::dataset::pauli_settings;
use lrtomo::{mle, simulate_dataset, BlochVector, DensityMatrix, MleOptions, TomographyDataset};

fn main() -> lrtomo::Result<()> {
    let truth = DensityMatrix::from_bloch(&BlochVector::new(vec![0.3, -0.2, 0.6]))?;
    let plan: Vec<_> = pauli_settings().into_iter().map(|p| (p, 500)).collect();
    let ds = simulate_dataset(&truth, &plan, 42)?;
    let path = std::env::temp_dir().join("lrtomo_simulated.json");
    ds.save(&path)?;
    let back = TomographyDataset::load(&path)?;
    assert_eq!(back, ds);
    for s in back.settings() {
        println!("{:<8} {:?}", s.name(), s.counts());
    }
    let m = mle(&back, &MleOptions::default())?;
    println!("true  {:+.3?}", truth.bloch().components());
    println!("MLE   {:+.3?} after {} iterations", m.rho_mle.bloch().components(), m.iterations);
    println!("saved to {}", path.display());
    Ok(())
}
