//! Calibrated per-axis error ellipsoid against the likelihood-ratio region.

use lrtomo::studies::naive_ellipsoid_baseline;
use lrtomo::TomographyDataset;

fn main() -> lrtomo::Result<()> {
    let trials: u64 = std::env::args().nth(1).map_or(2000, |a| a.parse().expect("trials"));
    let ds = TomographyDataset::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fig1.json"))?;
    let r = naive_ellipsoid_baseline(&ds, 0.9, trials, 1)?;
    println!("standard errors {:.4?}, radius {:.3}σ", r.sigma, r.radius);
    println!("ellipsoid volume {:.4} ({:.4} inside the Bloch ball)", r.ellipsoid_volume, r.ellipsoid_volume_clipped);
    println!("LR region volume {:.4} at cutoff {:.4}", r.lr_volume, r.lr_cutoff);
    println!(
        "worst grid coverage: ellipsoid {:.3}, LR {:.3}",
        r.worst_coverage_ellipsoid, r.worst_coverage_lr
    );
    Ok(())
}
