//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aim::{aim_fit, AimOptions};
use crate::coarsen::{build_coarsening_network, generate_dataset, CoarseningNetwork, CoarseningSpec};
use crate::conservative::conservative_ensemble;
use crate::data::Dataset;
use crate::em::{em_fit, EmInit, EmOptions};
use crate::error::{Error, Result};
use crate::eval::{score_estimate, KlMode};
use crate::experiment::{run_experiment, ExperimentConfig, Mechanism};
use crate::learn::{smooth, RowCounts};
use crate::likelihood::{car_normalizer, car_profile_loglik, exact_sat_profile_loglik, face_value_loglik};
use crate::netfile::{read_network, write_network_file};
use crate::network::Network;
use crate::numfmt::{human, machine};

#[derive(Parser, Debug)]
#[command(
    name = "coarsebn",
    version,
    about = "Learn Bayesian network parameters from incomplete data without assuming missing at random"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Aim,
    Em,
    Conservative,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Which {
    Fv,
    Sat,
    Car,
    Lr,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Auto,
    Enumerate,
    Decomposed,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample incomplete data through a coarsening mechanism.
    GenData {
        #[arg(long)]
        net: PathBuf,
        /// Random mechanism, written mp:mu:sigma.
        #[arg(long, required_unless_present = "mechanism", conflicts_with = "mechanism")]
        coarsening: Option<String>,
        /// Fixed mechanism: a network file with an obs<Name> node per variable.
        #[arg(long)]
        mechanism: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        emit_mechanism: Option<PathBuf>,
    },
    /// Fit parameters for a fixed structure.
    Learn {
        #[arg(long)]
        net_structure: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// em, uniform, or net:FILE.
        #[arg(long)]
        init: Option<String>,
        #[arg(long, default_value_t = 5)]
        z: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        /// Smoothed estimate.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Unsmoothed estimate.
        #[arg(long)]
        raw_out: Option<PathBuf>,
        /// Cases behind each CPT row, for `eval --counts`.
        #[arg(long)]
        counts_out: Option<PathBuf>,
    },
    /// Score an estimate against the true network.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Row counts; when given the estimate is treated as raw and smoothed first.
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        /// Source dataset, to report its missing percentage.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "estimate")]
        method: String,
    },
    /// Log-likelihoods of a dataset under a network.
    Lik {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Repeated EM versus AI&M comparison on generated data.
    Experiment {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, required_unless_present = "mechanism", conflicts_with = "mechanism")]
        coarsening: Option<String>,
        #[arg(long)]
        mechanism: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        z: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace every CPT row with uniformly drawn entries.
    Randomize {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::GenData {
            net,
            coarsening,
            mechanism,
            n,
            seed,
            out: path,
            emit_mechanism,
        } => gen_data(&net, coarsening, mechanism, n, seed, &path, emit_mechanism, out),
        Command::Learn {
            net_structure,
            data,
            method,
            init,
            z,
            tol,
            max_iters,
            restarts,
            seed,
            out: path,
            trace,
            raw_out,
            counts_out,
        } => {
            let structure = read_network(&net_structure)?;
            let data = Dataset::read_csv(&data, &structure)?;
            let args = LearnArgs {
                method,
                init,
                z,
                tol,
                max_iters,
                restarts,
                seed,
            };
            let fit = learn(&structure, &data, &args)?;
            write_network_file(&fit.smoothed, &path)?;
            if let Some(p) = raw_out {
                write_network_file(&fit.raw, p)?;
            }
            if let (Some(p), Some(k)) = (counts_out, &fit.counts) {
                std::fs::write(p, k.to_csv_string(&structure))?;
            }
            if let Some(p) = trace {
                std::fs::write(p, &fit.trace_csv)?;
            }
            writeln!(out, "{}", fit.summary)?;
            Ok(())
        }
        Command::Eval {
            truth,
            estimate,
            counts,
            mode,
            data,
            method,
        } => {
            let truth = read_network(&truth)?;
            let mut est = read_network(&estimate)?;
            if let Some(c) = counts {
                let k = RowCounts::from_csv_reader(std::fs::File::open(c)?, &est)?;
                est = smooth(&est, &k);
            }
            let pct = match data {
                Some(d) => 100.0 * Dataset::read_csv(d, &truth)?.missing_fraction(),
                None => f64::NAN,
            };
            let mode = match mode {
                Mode::Auto => KlMode::Auto,
                Mode::Enumerate => KlMode::Enumerate,
                Mode::Decomposed => KlMode::Decomposed,
            };
            let r = score_estimate(&truth, &est, &method, pct, mode)?;
            writeln!(out, "method,ce,mse,pct_missing")?;
            writeln!(out, "{},{},{},{}", r.method, machine(r.ce), machine(r.mse), machine(r.pct_missing))?;
            Ok(())
        }
        Command::Lik { net, data, which } => {
            let net = read_network(&net)?;
            let data = Dataset::read_csv(&data, &net)?;
            lik(&net, &data, which, out)
        }
        Command::Experiment {
            net,
            coarsening,
            mechanism,
            n,
            z,
            runs,
            seed,
            out: path,
        } => {
            let net = read_network(&net)?;
            let mech = match (coarsening, mechanism) {
                (Some(s), _) => Mechanism::Random(s.parse()?),
                (None, Some(m)) => Mechanism::Fixed(load_mechanism(&net, &m)?),
                (None, None) => return Err(Error::Usage("--coarsening or --mechanism is required".into())),
            };
            if runs == 0 || n == 0 || z == 0 {
                return Err(Error::Usage("--runs, --n and --z must be at least 1".into()));
            }
            let cfg = ExperimentConfig::new(net, mech, n, z, runs, seed);
            let res = run_experiment(&cfg);
            let file = std::fs::File::create(&path)?;
            res.write_csv(std::io::BufWriter::new(file))?;
            let s = res.summary();
            let names = ["pct_missing", "ce_final_em", "ce_final_aim", "ce_diff", "mse_diff", "score"];
            writeln!(out, "{} runs, {} failed", runs, res.failures().len())?;
            for (name, (m, sd)) in names.iter().zip(s) {
                writeln!(out, "{name:>12}: {} ± {}", human(m), human(sd))?;
            }
            for (run, msg) in res.failures() {
                writeln!(err, "run {run} failed: {msg}")?;
            }
            Ok(())
        }
        Command::Randomize { net, seed, out: path } => {
            let net = read_network(&net)?;
            let r = net.randomize_parameters(&mut ChaCha8Rng::seed_from_u64(seed));
            write_network_file(&r, &path)?;
            writeln!(out, "wrote {} with {} randomized rows", path.display(), (0..r.len()).map(|i| r.num_rows(i)).sum::<usize>())?;
            Ok(())
        }
    }
}

/// Reads an augmented network and checks that its original part has the
/// structure of `net`; the originals' CPTs are taken from `net`.
fn load_mechanism(net: &Network, path: &Path) -> Result<CoarseningNetwork> {
    let aug = read_network(path)?;
    let cn = CoarseningNetwork::from_augmented(aug, net.len())?;
    if !cn.original().same_structure(net) {
        return Err(Error::StructureMismatch(format!(
            "mechanism {} does not extend the given network",
            path.display()
        )));
    }
    let mut cpts = cn.augmented().cpts().to_vec();
    for (i, cpt) in net.cpts().iter().enumerate() {
        cpts[i] = cpt.clone();
    }
    CoarseningNetwork::from_augmented(cn.augmented().with_cpts(cpts)?, net.len())
}

#[allow(clippy::too_many_arguments)]
fn gen_data(
    net: &Path,
    coarsening: Option<String>,
    mechanism: Option<PathBuf>,
    n: usize,
    seed: u64,
    path: &Path,
    emit: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<()> {
    let net = read_network(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cn = match (coarsening, mechanism) {
        (Some(s), _) => {
            let spec: CoarseningSpec = s.parse()?;
            build_coarsening_network(&net, &spec, &mut rng)?
        }
        (None, Some(m)) => load_mechanism(&net, &m)?,
        (None, None) => return Err(Error::Usage("--coarsening or --mechanism is required".into())),
    };
    if n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let (data, frac) = generate_dataset(&cn, n, &mut rng)?;
    data.write_csv(path)?;
    if let Some(m) = emit {
        write_network_file(cn.augmented(), m)?;
    }
    writeln!(out, "wrote {n} cases to {} ({}% missing)", path.display(), human(100.0 * frac))?;
    Ok(())
}

struct LearnArgs {
    method: Method,
    init: Option<String>,
    z: usize,
    tol: Option<f64>,
    max_iters: Option<usize>,
    restarts: usize,
    seed: u64,
}

struct Fit {
    raw: Network,
    smoothed: Network,
    counts: Option<RowCounts>,
    trace_csv: String,
    summary: String,
}

enum Init {
    Em,
    Uniform,
    Net(Network),
}

fn parse_init(s: Option<&str>, default: Init) -> Result<Init> {
    match s {
        None => Ok(default),
        Some("em") => Ok(Init::Em),
        Some("uniform") => Ok(Init::Uniform),
        Some(other) => match other.strip_prefix("net:") {
            Some(p) => Ok(Init::Net(read_network(p)?)),
            None => Err(Error::Usage(format!("--init must be em, uniform or net:FILE, got `{other}`"))),
        },
    }
}

fn learn(structure: &Network, data: &Dataset, a: &LearnArgs) -> Result<Fit> {
    let mut em_opts = EmOptions::default();
    if let Some(t) = a.tol {
        em_opts.tol = t;
    }
    if let Some(k) = a.max_iters {
        em_opts.max_iters = k;
    }
    match a.method {
        Method::Em => {
            em_opts.init = match parse_init(a.init.as_deref(), Init::Uniform)? {
                Init::Uniform => EmInit::Uniform,
                Init::Net(n) => EmInit::Given(n),
                Init::Em => return Err(Error::Usage("--init em is only meaningful for --method aim".into())),
            };
            let r = em_fit(structure, data, &em_opts)?;
            let mut trace = String::from("iteration,loglik,excluded_weight\n");
            for it in &r.trace {
                trace.push_str(&format!("{},{},{}\n", it.iteration, machine(it.loglik), machine(it.excluded_weight)));
            }
            let summary = format!(
                "em: {} iterations, converged {}, face-value log-likelihood per case {}",
                r.iterations,
                r.converged,
                human(r.final_loglik)
            );
            Ok(Fit {
                raw: r.raw,
                smoothed: r.smoothed,
                counts: Some(r.row_counts),
                trace_csv: trace,
                summary,
            })
        }
        Method::Aim => {
            let theta0 = match parse_init(a.init.as_deref(), Init::Em)? {
                Init::Em => em_fit(structure, data, &em_opts)?.raw,
                Init::Uniform => structure.uniform(),
                Init::Net(n) => n,
            };
            let mut opts = AimOptions {
                z: a.z,
                seed: a.seed,
                ..AimOptions::default()
            };
            if let Some(t) = a.tol {
                opts.tol = t;
            }
            if let Some(k) = a.max_iters {
                opts.max_iters = k;
            }
            let r = aim_fit(structure, &theta0, data, &opts)?;
            let mut trace = String::from("iteration,score_after_ai,score_after_m,sat_lower_bound,moves\n");
            for it in &r.trace {
                trace.push_str(&format!(
                    "{},{},{},{},{}\n",
                    it.iteration,
                    machine(it.score_after_ai),
                    machine(it.score_after_m),
                    machine(it.sat_lower_bound),
                    it.moves
                ));
            }
            let summary = format!(
                "aim: {} iterations, converged {}, terminal score {}",
                r.trace.len(),
                r.converged,
                human(r.score)
            );
            Ok(Fit {
                raw: r.raw,
                smoothed: r.smoothed,
                counts: Some(r.row_counts),
                trace_csv: trace,
                summary,
            })
        }
        Method::Conservative => {
            let e = conservative_ensemble(structure, data, a.restarts, a.seed)?;
            let mut trace = String::from("node,entry,low,high,mid\n");
            for (i, (lo, hi)) in e.low.iter().zip(&e.high).enumerate() {
                for (k, (l, h)) in lo.iter().zip(hi).enumerate() {
                    trace.push_str(&format!(
                        "{},{k},{},{},{}\n",
                        structure.node(i).name,
                        machine(*l),
                        machine(*h),
                        machine(0.5 * (l + h))
                    ));
                }
            }
            let widest = e
                .low
                .iter()
                .flatten()
                .zip(e.high.iter().flatten())
                .map(|(l, h)| h - l)
                .fold(0.0, f64::max);
            let mid = e.midpoint_network();
            Ok(Fit {
                raw: mid.clone(),
                smoothed: mid,
                counts: None,
                trace_csv: trace,
                summary: format!(
                    "conservative: {} completions, widest interval {}",
                    a.restarts,
                    human(widest)
                ),
            })
        }
    }
}

/// Integer-weight copy of `data` for replication; weights that are
/// multiples of 1/1000 are scaled up, which leaves per-case values unchanged.
fn integer_version(net: &Network, data: &Dataset) -> Result<Dataset> {
    if data.integer_weights().is_ok() {
        return Ok(data.clone());
    }
    let mut cases = Vec::with_capacity(data.len());
    for (i, (u, w)) in data.cases().iter().enumerate() {
        let s = w * 1000.0;
        if (s - s.round()).abs() > 1e-6 || s.round() < 1.0 {
            return Err(Error::FractionalWeights { case: i, weight: *w });
        }
        cases.push((u.clone(), s.round()));
    }
    Dataset::new(net, cases)
}

fn lik(net: &Network, data: &Dataset, which: Which, out: &mut dyn Write) -> Result<()> {
    match which {
        Which::Fv => {
            let r = face_value_loglik(net, data)?;
            writeln!(out, "fv per-case log-likelihood: {}", human(r.per_case_average))?;
            writeln!(out, "fv total: {} (N = {})", human(r.total), human(r.total_weight))?;
        }
        Which::Sat => {
            let r = exact_sat_profile_loglik(net, data, 1e-14)?;
            writeln!(out, "sat per-case log-likelihood: {}", human(r.per_case_average))?;
            writeln!(out, "sat total: {} (N = {})", human(r.total), human(r.total_weight))?;
            if let Some(c) = r.completion() {
                writeln!(out, "optimal completion of coarse cases:")?;
                let mut shown = std::collections::BTreeSet::new();
                for ((u, _), dist) in data.cases().iter().zip(c.per_case()) {
                    if u.is_complete() || !shown.insert(u.clone()) {
                        continue;
                    }
                    let parts: Vec<String> = dist
                        .iter()
                        .map(|(x, p)| {
                            let labels: Vec<&str> =
                                x.iter().enumerate().map(|(i, &s)| net.node(i).states[s].as_str()).collect();
                            format!("({}) {}", labels.join(","), human(*p))
                        })
                        .collect();
                    writeln!(out, "  {} -> {}", u.display(net), parts.join(", "))?;
                }
            }
        }
        Which::Car => {
            let r = car_profile_loglik(net, data)?;
            let f = car_normalizer(data, net)?;
            writeln!(out, "car per-case log-likelihood: {}", human(r.per_case_average))?;
            writeln!(out, "car total: {} (N = {})", human(r.total), human(r.total_weight))?;
            writeln!(out, "car normalizer log f per case: {}", human(f.log_f_per_unit))?;
        }
        Which::Lr => {
            // car side: face-value maximum by EM started at the given network
            let em = em_fit(
                net,
                data,
                &EmOptions {
                    tol: 1e-10,
                    max_iters: 10_000,
                    init: EmInit::Given(net.clone()),
                },
            )?;
            let car = car_profile_loglik(&em.raw, data)?.per_case_average;
            // sat side: best of the EM and AI&M estimates, scored exactly
            let aim = aim_fit(
                net,
                &em.raw,
                &integer_version(net, data)?,
                &AimOptions {
                    z: 10,
                    ..AimOptions::default()
                },
            )?;
            let sat_em = exact_sat_profile_loglik(&em.raw, data, 1e-14)?.per_case_average;
            let sat_aim = exact_sat_profile_loglik(&aim.raw, data, 1e-14)?.per_case_average;
            let sat = sat_em.max(sat_aim);
            let lr = (sat - car).max(0.0);
            writeln!(out, "max car per-case log-likelihood: {}", human(car))?;
            writeln!(out, "max sat per-case log-likelihood (lower bound): {}", human(sat))?;
            writeln!(out, "lr per case: {}", human(lr))?;
            writeln!(out, "lr statistic 2*N*lr: {}", human(2.0 * data.total_weight() * lr))?;
        }
    }
    Ok(())
}
