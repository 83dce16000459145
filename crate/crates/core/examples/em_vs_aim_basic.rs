//! EM and AI&M on 2000 cases of the two-variable example.
//!
//! AI&M starts from the EM estimate and walks the completion of the hidden
//! B values until the completed data fits the model, recovering P(B=t) = 0.2.

use coarsebn::aim::{aim_fit, AimOptions};
use coarsebn::data::{CoarseCase, Dataset};
use coarsebn::em::{em_fit, EmOptions};
use coarsebn::eval::{kl_enumerate, mse};
use coarsebn::fixtures;
use coarsebn::numfmt::human;

fn main() -> coarsebn::Result<()> {
    let truth = fixtures::basic();
    let data = Dataset::new(
        &truth,
        vec![
            (CoarseCase(vec![Some(0), None]), 900.0),
            (CoarseCase(vec![Some(0), Some(0)]), 100.0),
            (CoarseCase(vec![Some(1), Some(0)]), 200.0),
            (CoarseCase(vec![Some(1), Some(1)]), 800.0),
        ],
    )?;

    let em = em_fit(&truth, &data, &EmOptions::default())?;
    println!("EM:   {} iterations, P(B=t) = {}", em.iterations, human(em.raw.cpt(1)[0]));

    let opts = AimOptions {
        z: 10,
        ..AimOptions::default()
    };
    let aim = aim_fit(&truth, &em.raw, &data, &opts)?;
    println!("AI&M: {} iterations, P(B=t) = {}", aim.trace.len(), human(aim.raw.cpt(1)[0]));
    println!("\niteration  score after AI  score after M  sat lower bound  moves");
    for it in &aim.trace {
        println!(
            "{:>9}  {:>13}  {:>12}  {:>15}  {:>5}",
            it.iteration,
            human(it.score_after_ai),
            human(it.score_after_m),
            human(it.sat_lower_bound),
            it.moves
        );
    }

    println!("\nsmoothed estimates against the truth:");
    for (name, est) in [("EM", &em.smoothed), ("AI&M", &aim.smoothed)] {
        println!("  {name:<5} KL = {}  MSE = {}", human(kl_enumerate(&truth, est)?), human(mse(&truth, est)?));
    }
    Ok(())
}
