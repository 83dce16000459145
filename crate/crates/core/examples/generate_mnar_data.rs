//! Draw a random not-at-random coarsening mechanism for Asia, sample 1000
//! incomplete cases from it, and write the data and mechanism to a temp
//! directory.
//!
//! Usage: cargo run --example generate_mnar_data -- [mp:mu:sigma] [seed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coarsebn::coarsen::{build_coarsening_network, generate_dataset, CoarseningSpec};
use coarsebn::fixtures;
use coarsebn::netfile::write_network_file;
use coarsebn::numfmt::human;

fn main() -> coarsebn::Result<()> {
    let mut args = std::env::args().skip(1);
    let spec: CoarseningSpec = args.next().as_deref().unwrap_or("2:0.1:0.05").parse()?;
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse()).expect("seed must be an integer");

    let net = fixtures::asia();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cn = build_coarsening_network(&net, &spec, &mut rng)?;
    let (data, frac) = generate_dataset(&cn, 1000, &mut rng)?;

    println!("mechanism {spec}, seed {seed}: {}% of cells missing", human(100.0 * frac));
    for i in 0..net.len() {
        let obs = cn.augmented().node(cn.obs_node(i));
        let parents: Vec<&str> = obs.parents.iter().map(|&p| cn.augmented().node(p).name.as_str()).collect();
        let hidden = data.cases().iter().filter(|(u, _)| u[i].is_none()).count();
        println!("  {:<6} hidden in {:>4} cases; {} depends on {}", net.node(i).name, hidden, obs.name, parents.join(", "));
    }

    let dir = std::env::temp_dir().join("coarsebn-example");
    std::fs::create_dir_all(&dir)?;
    data.write_csv(dir.join("asia_mnar.csv"))?;
    write_network_file(cn.augmented(), dir.join("asia_mechanism.net"))?;
    println!("\nwrote {}", dir.display());
    Ok(())
}
