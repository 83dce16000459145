//! Conservative estimation on the two-variable example: exact marginal
//! bounds over all completions, and the envelope of estimates from random
//! completions.

use coarsebn::conservative::{conservative_ensemble, marginal_bounds};
use coarsebn::data::{CoarseCase, Dataset};
use coarsebn::fixtures;
use coarsebn::numfmt::human;

fn main() -> coarsebn::Result<()> {
    let net = fixtures::basic();
    let data = Dataset::new(
        &net,
        vec![
            (CoarseCase(vec![Some(0), None]), 900.0),
            (CoarseCase(vec![Some(0), Some(0)]), 100.0),
            (CoarseCase(vec![Some(1), Some(0)]), 200.0),
            (CoarseCase(vec![Some(1), Some(1)]), 800.0),
        ],
    )?;

    for (var, state) in [("A", "t"), ("B", "t")] {
        let b = marginal_bounds(&data, var, state)?;
        println!("P({var}={state}) in [{}, {}], midpoint {}", human(b.low), human(b.high), human(b.mid));
    }

    let e = conservative_ensemble(&net, &data, 50, 3)?;
    println!(
        "\n50 random completions: P(B=t) ranges over [{}, {}]",
        human(e.low[1][0]),
        human(e.high[1][0])
    );
    println!("(an inner approximation: uniform fills rarely reach the extreme completions)");
    Ok(())
}
