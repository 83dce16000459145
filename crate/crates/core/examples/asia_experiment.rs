//! The EM versus AI&M comparison on Asia with random mechanisms, printed as
//! CSV followed by mean ± sd per column.
//!
//! Usage: cargo run --release --example asia_experiment -- [runs] [seed] [mp:mu:sigma]

use coarsebn::experiment::{run_experiment, ExperimentConfig, Mechanism};
use coarsebn::fixtures;

fn main() -> coarsebn::Result<()> {
    let mut args = std::env::args().skip(1);
    let runs: usize = args.next().map_or(Ok(20), |s| s.parse()).expect("runs must be an integer");
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse()).expect("seed must be an integer");
    let spec = args.next().unwrap_or_else(|| "2:0.1:0.05".into()).parse()?;

    let cfg = ExperimentConfig::new(fixtures::asia(), Mechanism::Random(spec), 1000, 5, runs, seed);
    let res = run_experiment(&cfg);
    print!("{}", res.to_csv_string());
    for (run, msg) in res.failures() {
        eprintln!("run {run} failed: {msg}");
    }
    Ok(())
}
