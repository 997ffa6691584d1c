//! Exact α = 0.9 cutoff for a coin flipped 60 times, as a function of the
//! true ⟨σ_z⟩. It hovers around the one-parameter chi-squared value.

use lrtomo::dataset::pauli_setting;
use lrtomo::sampling::linspace_unit;
use lrtomo::studies::{ExhaustiveEnsemble, DEFAULT_CAP};
use lrtomo::{solve_threshold, BlochVector, DensityMatrix, MleOptions, ThresholdRule};

fn main() -> lrtomo::Result<()> {
    let alpha = 0.9;
    let plan = vec![(pauli_setting("z")?, 60)];
    let ensemble = ExhaustiveEnsemble::new(&plan, DEFAULT_CAP, &MleOptions::default())?;
    let chi = solve_threshold(&ThresholdRule::ChiSquare { k: 1 }, alpha)?;
    let eq9 = solve_threshold(&ThresholdRule::Eq9Bound { k: 1 }, alpha)?;
    println!("chi2_1 = {chi:.4}, eq9_1 = {eq9:.4}");
    for z in linspace_unit(41) {
        let rho = DensityMatrix::from_bloch(&BlochVector::new(vec![0.0, 0.0, z]))?;
        let c = ensemble.cutoff(&rho, alpha)?;
        let bar = "#".repeat((c * 10.0).round() as usize);
        println!("{z:>5.2} {c:>7.4} {bar}");
    }
    Ok(())
}
