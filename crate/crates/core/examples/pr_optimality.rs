//! Probability-ratio regions on a discrete coin model, against random
//! challengers and the likelihood-ratio assignment.

use lrtomo::studies::{
    lr_assignment, perturbed_pr_challenger, pr_assignment, pr_optimality_check, random_challenger, Assignment,
    DiscreteModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(label: &str, model: &DiscreteModel, alpha: f64, rng: &mut ChaCha8Rng) -> lrtomo::Result<()> {
    let pr = pr_assignment(model, alpha)?;
    pr.check_coverage(model, alpha)?;
    println!("{label}: ⟨V⟩_PR = {:.6}, worst coverage {:.4}", pr.average_volume(model), pr.worst_coverage(model).1);
    let (lr, cut) = lr_assignment(model, alpha)?;
    let mut rivals: Vec<(&str, Assignment)> = vec![("likelihood ratio", lr)];
    for k in 0..50 {
        rivals.push(if k % 2 == 0 {
            ("random order", random_challenger(model, alpha, rng))
        } else {
            ("perturbed ratio", perturbed_pr_challenger(model, alpha, 0.5, rng))
        });
    }
    let mut beaten = 0;
    for (name, a) in &rivals {
        let c = pr_optimality_check(model, alpha, a)?;
        if !c.pr_not_worse {
            beaten += 1;
            println!("  {name} challenger smaller by {:.3e}", c.pr_volume - c.challenger_volume);
        }
    }
    println!("  LR cutoff {cut:.4}; PR beaten by {beaten} of {} challengers", rivals.len());
    Ok(())
}

fn main() -> lrtomo::Result<()> {
    let alpha = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = DiscreteModel::coin(21, 10)?;
    for j in [0, 5, 10] {
        let states: Vec<String> = pr_assignment(&model, alpha)?
            .region(j)
            .iter()
            .map(|&i| format!("{:+.1}", model.states()[i]))
            .collect();
        println!("{j} heads → ⟨σ_z⟩ ∈ {{{}}}", states.join(", "));
    }
    report("uniform volume", &model, alpha, &mut rng)?;
    let v: Vec<f64> = (0..21).map(|_| rng.random_range(0.1..2.0)).collect();
    report("random volume", &model.clone().with_volume(v)?, alpha, &mut rng)?;
    let lr_measure = model.clone().with_marginal(model.lr_marginal())?;
    report("marginal ∝ max likelihood", &lr_measure, alpha, &mut rng)?;
    Ok(())
}
