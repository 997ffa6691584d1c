//! Cutoffs from the three tail bounds over a range of confidence levels.

use lrtomo::threshold::{chi2_ccdf, eq9_bound, lemma1_bound};
use lrtomo::{solve_threshold, ThresholdRule};

fn main() -> lrtomo::Result<()> {
    let rules = [
        ThresholdRule::ChiSquare { k: 3 },
        ThresholdRule::Eq9Bound { k: 3 },
        ThresholdRule::Lemma1 { copies: 60, dim: 2 },
    ];
    println!("{:>6} {:>10} {:>10} {:>10}", "alpha", "chi2", "eq9", "lemma1");
    for alpha in [0.5, 0.68, 0.9, 0.95, 0.99, 0.999] {
        let cut: Vec<f64> = rules.iter().map(|r| solve_threshold(r, alpha)).collect::<lrtomo::Result<_>>()?;
        println!("{alpha:>6} {:>10.4} {:>10.4} {:>10.4}", cut[0], cut[1], cut[2]);
    }

    println!("\ntail bounds F(λ), k = 3, N = 60, d = 2");
    println!("{:>6} {:>12} {:>12} {:>12}", "lambda", "chi2", "eq9", "lemma1");
    for l in [1.0, 5.0, 10.0, 20.0, 40.0] {
        println!(
            "{l:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            chi2_ccdf(3, l)?,
            eq9_bound(3, l)?,
            lemma1_bound(60, 2, l)?
        );
    }
    Ok(())
}
