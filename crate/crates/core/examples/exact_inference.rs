//! Variable elimination on Asia: evidence probabilities, a posterior family
//! table, and a check against brute-force summation.

use coarsebn::fixtures;
use coarsebn::inference::{completions, evidence_probability, posterior_family_marginals};
use coarsebn::numfmt::human;

fn main() -> coarsebn::Result<()> {
    let net = fixtures::asia();
    let idx = |n: &str| net.node_index(n).expect("asia node");

    let mut ev = vec![None; net.len()];
    ev[idx("xray")] = Some(0);
    ev[idx("dysp")] = Some(0);
    let pe = evidence_probability(&net, &ev)?;
    let brute: f64 = completions(&net, &ev).map(|x| net.joint_probability(&x).unwrap()).sum();
    println!("P(xray=yes, dysp=yes) = {} (enumeration: {})", human(pe), human(brute));

    let fams = posterior_family_marginals(&net, &ev)?;
    let lung = idx("lung");
    let post: f64 = fams[lung].chunks(2).map(|row| row[0]).sum();
    println!("P(lung=yes | xray=yes, dysp=yes) = {}", human(post));

    ev[idx("smoke")] = Some(1);
    let fams = posterior_family_marginals(&net, &ev)?;
    let post: f64 = fams[lung].chunks(2).map(|row| row[0]).sum();
    println!("... and for a non-smoker: {}", human(post));
    Ok(())
}
