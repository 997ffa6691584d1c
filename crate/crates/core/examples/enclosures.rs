//! Ellipsoid and ball enclosing sampled region boundary points.

use lrtomo::region::{minimum_enclosing_ball, minimum_volume_ellipsoid, EnclosureKind, RegionSpec};
use lrtomo::{MleOptions, ThresholdRule, TomographyDataset};

fn main() -> lrtomo::Result<()> {
    let ds = TomographyDataset::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fig1.json"))?;
    let region = RegionSpec::new(ds, 0.9, ThresholdRule::ChiSquare { k: 3 }, &MleOptions::default())?;
    let samples = region.boundary_samples(400, &[])?;
    let points: Vec<Vec<f64>> = samples.iter().map(|b| b.point.clone()).collect();
    println!("{} boundary points, {} clipped by the Bloch sphere", points.len(), samples.iter().filter(|b| b.clipped).count());

    let e = minimum_volume_ellipsoid(&points, 1e-5)?;
    let b = minimum_enclosing_ball(&points)?;
    if let EnclosureKind::Ellipsoid { center, .. } = &e.kind {
        println!("ellipsoid center {center:.4?}");
    }
    if let EnclosureKind::Ball { center, radius } = &b.kind {
        println!("ball center {center:.4?}, radius {radius:.4}");
    }
    println!("volume relative to the unit ball: ellipsoid {:.4}, ball {:.4}", e.relative_volume(), b.relative_volume());
    println!("region itself: {:.4}", region.volume_fraction(200_000, 3));
    Ok(())
}
