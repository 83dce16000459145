//! Read off the coarsening mechanism implied by the sat-optimal completion
//! of the two-variable example, and check that it is not at random.

use coarsebn::completion::{empirical_pattern_distribution, recover_coarsening};
use coarsebn::data::CoarseCase;
use coarsebn::fixtures;
use coarsebn::likelihood::exact_sat_profile_loglik;
use coarsebn::numfmt::human;

fn main() -> coarsebn::Result<()> {
    let net = fixtures::basic();
    let data = fixtures::basic_ex21_data();
    let sat = exact_sat_profile_loglik(&net, &data, 1e-14)?;
    let c = sat.completion().expect("finite sat value has a completion");
    let m = empirical_pattern_distribution(&data);
    let model = recover_coarsening(&m, c, &data, &net)?;

    let hidden_b = CoarseCase(vec![Some(0), None]);
    for x in [vec![0, 0], vec![0, 1]] {
        println!(
            "P(B hidden | A={}, B={}) = {}",
            net.node(0).states[x[0]],
            net.node(1).states[x[1]],
            human(model.lambda(&x, &hidden_b))
        );
    }
    println!("missing at random: {}", model.car);
    for u in m.freq.keys() {
        println!(
            "  P({}) model {} vs data {}",
            u.display(&net),
            human(model.pattern_probability(&net, u)),
            human(m.get(u))
        );
    }
    Ok(())
}
