//! Expectation maximization on the face-value likelihood.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{CoarseCase, Dataset};
use crate::error::{Error, Result};
use crate::inference;
use crate::learn::{ml_from_counts, smooth, CountTable, RowCounts};
use crate::network::{FullAssignment, Network};

/// Patterns with at most this many completions use enumeration in the
/// E-step; larger ones use per-family posterior marginals.
const ENUMERATE_LIMIT: f64 = 4096.0;
/// Parameter change below which an iteration counts as a fixed point.
const FIXED_POINT: f64 = 1e-14;

#[derive(Clone, Debug, Default)]
pub enum EmInit {
    Given(Network),
    #[default]
    Uniform,
    /// Rows drawn uniformly at random, seeded.
    RandomRows(u64),
}

#[derive(Clone, Debug)]
pub struct EmOptions {
    /// Convergence threshold: iteration stops once the per-case face-value
    /// log-likelihood gain and the largest parameter step both fall below it.
    pub tol: f64,
    pub max_iters: usize,
    pub init: EmInit,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-6,
            max_iters: 200,
            init: EmInit::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmIteration {
    pub iteration: usize,
    /// Per-case face-value log-likelihood at the parameters entering this
    /// iteration.
    pub loglik: f64,
    /// Weight of cases with zero probability, left out of the counts.
    pub excluded_weight: f64,
    pub excluded_cases: usize,
}

#[derive(Clone, Debug)]
pub struct EmResult {
    pub raw: Network,
    pub smoothed: Network,
    /// Expected cases behind each CPT row.
    pub row_counts: RowCounts,
    pub trace: Vec<EmIteration>,
    pub final_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

enum Contribution {
    Point(FullAssignment),
    Weighted(Vec<(FullAssignment, f64)>),
    Families(Vec<Vec<f64>>),
}

struct Expectation {
    counts: CountTable,
    loglik: f64,
    excluded_weight: f64,
    excluded_cases: usize,
}

fn expected_counts(net: &Network, cases: &[(CoarseCase, f64)]) -> Result<Expectation> {
    let parts: Vec<Result<(f64, Option<Contribution>)>> = cases
        .par_iter()
        .map(|(u, _)| {
            if u.is_complete() {
                let x: FullAssignment = u.iter().map(|e| e.expect("complete")).collect();
                let p = net.joint_unchecked(&x);
                return Ok((p, (p > 0.0).then_some(Contribution::Point(x))));
            }
            if inference::completion_count(net, u) <= ENUMERATE_LIMIT {
                let (pe, post) = inference::enumerate_posterior(net, u)?;
                Ok((pe, (pe > 0.0).then_some(Contribution::Weighted(post))))
            } else {
                let pe = inference::evidence_probability(net, u)?;
                if pe > 0.0 {
                    let fams = inference::posterior_family_marginals(net, u)?;
                    Ok((pe, Some(Contribution::Families(fams))))
                } else {
                    Ok((pe, None))
                }
            }
        })
        .collect();
    let mut e = Expectation {
        counts: CountTable::zeros(net),
        loglik: 0.0,
        excluded_weight: 0.0,
        excluded_cases: 0,
    };
    for ((_, w), part) in cases.iter().zip(parts) {
        let (pe, contribution) = part?;
        e.loglik += w * pe.ln();
        match contribution {
            None => {
                e.excluded_weight += w;
                e.excluded_cases += 1;
            }
            Some(Contribution::Point(x)) => e.counts.add_assignment(net, &x, *w),
            Some(Contribution::Weighted(post)) => {
                for (x, p) in post {
                    e.counts.add_assignment(net, &x, w * p);
                }
            }
            Some(Contribution::Families(fams)) => {
                for (i, table) in fams.iter().enumerate() {
                    e.counts.add_family(i, table, *w);
                }
            }
        }
    }
    Ok(e)
}

fn initial_parameters(structure: &Network, init: &EmInit) -> Result<Network> {
    match init {
        EmInit::Uniform => Ok(structure.uniform()),
        EmInit::RandomRows(seed) => Ok(structure.randomize_parameters(&mut ChaCha8Rng::seed_from_u64(*seed))),
        EmInit::Given(net) => {
            if !net.same_structure(structure) {
                return Err(Error::StructureMismatch(
                    "initial parameters do not match the structure".into(),
                ));
            }
            let diags = net.validate();
            if diags.is_empty() {
                Ok(net.clone())
            } else {
                Err(Error::InvalidNetwork(diags))
            }
        }
    }
}

pub fn em_fit(structure: &Network, data: &Dataset, opts: &EmOptions) -> Result<EmResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidSpec(format!("tolerance must be positive, got {}", opts.tol)));
    }
    data.check_binds(structure)?;
    let n = data.total_weight();
    let cases: Vec<(CoarseCase, f64)> = data.grouped().into_iter().filter(|(_, w)| *w > 0.0).collect();
    let complete = data.is_complete();

    let mut theta = initial_parameters(structure, &opts.init)?;
    let mut trace: Vec<EmIteration> = Vec::new();
    let mut rows = RowCounts::zeros(structure);
    let mut converged = false;
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    while iterations < opts.max_iters {
        let e = expected_counts(&theta, &cases)?;
        if e.excluded_cases == cases.len() {
            return Err(Error::ZeroEvidence(
                "every case has probability zero under the current parameters".into(),
            ));
        }
        let ll = e.loglik / n;
        if let Some(prev) = trace.last() {
            if ll - prev.loglik < opts.tol && last_step < opts.tol {
                trace.push(EmIteration {
                    iteration: iterations,
                    loglik: ll,
                    excluded_weight: e.excluded_weight,
                    excluded_cases: e.excluded_cases,
                });
                converged = true;
                break;
            }
        }
        trace.push(EmIteration {
            iteration: iterations,
            loglik: ll,
            excluded_weight: e.excluded_weight,
            excluded_cases: e.excluded_cases,
        });
        let (next, k) = ml_from_counts(structure, &e.counts);
        iterations += 1;
        last_step = next.max_param_diff(&theta);
        let still = last_step <= FIXED_POINT;
        theta = next;
        rows = k;
        if complete || still {
            converged = true;
            break;
        }
    }
    if iterations == 0 {
        // no M-step ran; expected counts at the initial parameters
        let e = expected_counts(&theta, &cases)?;
        rows = ml_from_counts(structure, &e.counts).1;
    }
    let final_loglik = crate::likelihood::face_value_loglik(&theta, data)?.per_case_average;
    let smoothed = smooth(&theta, &rows);
    Ok(EmResult {
        raw: theta,
        smoothed,
        row_counts: rows,
        trace,
        final_loglik,
        iterations,
        converged,
    })
}
