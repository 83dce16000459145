//! Scoring estimates against a known network: KL by enumeration and by the
//! chain rule, parameter MSE, and the effect of smoothing on sparse rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coarsebn::data::Dataset;
use coarsebn::eval::{evaluate, kl_decomposed, kl_enumerate, mse, KlMode};
use coarsebn::fixtures;
use coarsebn::learn::ml_estimate;
use coarsebn::numfmt::human;

fn main() -> coarsebn::Result<()> {
    let truth = fixtures::asia();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let random = truth.randomize_parameters(&mut rng);
    println!(
        "random parameters: KL {} (chain rule {}), MSE {}",
        human(kl_enumerate(&truth, &random)?),
        human(kl_decomposed(&truth, &random)?),
        human(mse(&truth, &random)?)
    );

    for n in [100, 1000, 10_000] {
        let xs = truth.sample(n, &mut rng);
        let data = Dataset::from_complete(&truth, &xs)?;
        let (raw, counts) = ml_estimate(&truth, data.cases().iter().zip(&xs).map(|((_, w), x)| (x.as_slice(), *w)));
        let unsmoothed = kl_enumerate(&truth, &raw)?;
        let r = evaluate(&truth, &raw, &counts, "ml", 0.0, KlMode::Auto)?;
        println!("N = {n:>5}: KL raw {:>10}, smoothed {:>10}", human(unsmoothed), human(r.ce));
    }
    Ok(())
}
