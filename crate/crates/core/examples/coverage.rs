//! Monte Carlo coverage of regions built with each cutoff rule.

use lrtomo::dataset::pauli_settings;
use lrtomo::sampling::qubit_state_grid;
use lrtomo::studies::{coverage_mc_with_cache, MleCache};
use lrtomo::{MleOptions, ThresholdRule};

fn main() -> lrtomo::Result<()> {
    let trials: u64 = std::env::args().nth(1).map_or(2000, |a| a.parse().expect("trials"));
    let plan: Vec<_> = pauli_settings().into_iter().map(|p| (p, 20)).collect();
    let cache = MleCache::new(MleOptions::default());
    let rules = [ThresholdRule::ChiSquare { k: 3 }, ThresholdRule::Eq9Bound { k: 3 }];
    println!("{:<28} {:>10} {:>10}", "true Bloch vector", "chi2", "eq9");
    for (i, rho) in qubit_state_grid(13).iter().enumerate() {
        let mut row = Vec::new();
        for rule in &rules {
            let r = coverage_mc_with_cache(rho, &plan, rule, 0.9, trials, i as u64, &cache)?;
            row.push(format!("{:.3}±{:.3}", r.coverage, r.half_width()));
        }
        let b: Vec<String> = rho.bloch().components().iter().map(|x| format!("{x:+.2}")).collect();
        println!("{:<28} {:>10} {:>10}", b.join(" "), row[0], row[1]);
    }
    println!("{} distinct datasets", cache.len());
    Ok(())
}
