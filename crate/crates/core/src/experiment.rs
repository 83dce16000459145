//! Batch comparison of EM and AI&M on generated incomplete data.
//!
//! Each run builds (or reuses) a coarsening mechanism, samples N cases, fits
//! EM from uniform rows, starts AI&M at the raw EM estimate, and scores both
//! smoothed estimates against the generating network.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aim::{aim_fit, AimOptions};
use crate::coarsen::{build_coarsening_network, generate_dataset, CoarseningNetwork, CoarseningSpec};
use crate::em::{em_fit, EmOptions};
use crate::error::Result;
use crate::eval::{kl, mse, KlMode};
use crate::network::Network;
use crate::numfmt::machine;
use crate::seed::derive_seed;

pub const CSV_HEADER: &str = "run,pct_missing,ce_final_em,ce_final_aim,ce_diff,mse_diff,score";

#[derive(Clone, Debug)]
pub enum Mechanism {
    /// A fresh random mechanism per run.
    Random(CoarseningSpec),
    /// The same mechanism for every run.
    Fixed(CoarseningNetwork),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub net: Network,
    pub mechanism: Mechanism,
    pub n: usize,
    pub z: usize,
    pub runs: usize,
    pub seed: u64,
    pub em: EmOptions,
    pub aim_tol: f64,
    pub aim_max_iters: usize,
}

impl ExperimentConfig {
    pub fn new(net: Network, mechanism: Mechanism, n: usize, z: usize, runs: usize, seed: u64) -> Self {
        let aim = AimOptions::default();
        ExperimentConfig {
            net,
            mechanism,
            n,
            z,
            runs,
            seed,
            em: EmOptions::default(),
            aim_tol: aim.tol,
            aim_max_iters: aim.max_iters,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub run: usize,
    /// Missing cells, in percent.
    pub pct_missing: f64,
    pub ce_final_em: f64,
    pub ce_final_aim: f64,
    /// AI&M minus EM; negative favours AI&M.
    pub ce_diff: f64,
    pub mse_diff: f64,
    /// Terminal AI&M score.
    pub score: f64,
}

impl RunRow {
    fn values(&self) -> [f64; 6] {
        [
            self.pct_missing,
            self.ce_final_em,
            self.ce_final_aim,
            self.ce_diff,
            self.mse_diff,
            self.score,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    /// One entry per run, in run order.
    pub runs: Vec<std::result::Result<RunRow, String>>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentResult {
    pub fn rows(&self) -> impl Iterator<Item = &RunRow> {
        self.runs.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> Vec<(usize, &str)> {
        self.runs
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e.as_str())))
            .collect()
    }

    /// (mean, sd) per metric column over the successful runs.
    pub fn summary(&self) -> [(f64, f64); 6] {
        let rows: Vec<[f64; 6]> = self.rows().map(RunRow::values).collect();
        std::array::from_fn(|k| mean_sd(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
    }

    pub fn mean_ce_diff(&self) -> f64 {
        self.summary()[3].0
    }

    pub fn mean_score(&self) -> f64 {
        self.summary()[5].0
    }

    /// Writes the results table. Failed runs keep their row with NaN cells;
    /// the last row holds mean±sd of each column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for (i, r) in self.runs.iter().enumerate() {
            let values = match r {
                Ok(row) => row.values(),
                Err(_) => [f64::NAN; 6],
            };
            let cells: Vec<String> = values.iter().map(|&v| machine(v)).collect();
            writeln!(w, "{i},{}", cells.join(","))?;
        }
        let cells: Vec<String> = self
            .summary()
            .iter()
            .map(|(m, s)| format!("{}±{}", machine(*m), machine(*s)))
            .collect();
        writeln!(w, "mean±sd,{}", cells.join(","))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }
}

fn one_run(cfg: &ExperimentConfig, run: usize) -> Result<RunRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, run as u64));
    let built;
    let cn = match &cfg.mechanism {
        Mechanism::Fixed(cn) => cn,
        Mechanism::Random(spec) => {
            built = build_coarsening_network(&cfg.net, spec, &mut rng)?;
            &built
        }
    };
    let (data, frac) = generate_dataset(cn, cfg.n, &mut rng)?;
    let em = em_fit(&cfg.net, &data, &cfg.em)?;
    let aim_opts = AimOptions {
        z: cfg.z,
        tol: cfg.aim_tol,
        max_iters: cfg.aim_max_iters,
        seed: rng.gen(),
        ..AimOptions::default()
    };
    let aim = aim_fit(&cfg.net, &em.raw, &data, &aim_opts)?;
    let ce_em = kl(&cfg.net, &em.smoothed, KlMode::Auto)?;
    let ce_aim = kl(&cfg.net, &aim.smoothed, KlMode::Auto)?;
    let mse_em = mse(&cfg.net, &em.smoothed)?;
    let mse_aim = mse(&cfg.net, &aim.smoothed)?;
    Ok(RunRow {
        run,
        pct_missing: 100.0 * frac,
        ce_final_em: ce_em,
        ce_final_aim: ce_aim,
        ce_diff: ce_aim - ce_em,
        mse_diff: mse_aim - mse_em,
        score: aim.score,
    })
}

/// Runs execute in parallel; results come back in run order and depend only
/// on the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> ExperimentResult {
    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|r| one_run(cfg, r).map_err(|e| e.to_string()))
        .collect();
    ExperimentResult { runs }
}
