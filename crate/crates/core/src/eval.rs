//! Quality of an estimate against the generating network.

use crate::error::{Error, Result};
use crate::inference::prior_marginal;
use crate::learn::{smooth, RowCounts};
use crate::network::Network;

/// Largest state space [`kl_enumerate`] will walk.
pub const ENUMERATE_LIMIT: f64 = (1u64 << 20) as f64;

/// KL(P_truth ‖ P_estimate) summed over every full assignment. Infinite when
/// the estimate gives zero probability to a state the truth can produce.
pub fn kl_enumerate(truth: &Network, estimate: &Network) -> Result<f64> {
    if !truth.same_domains(estimate) {
        return Err(Error::StructureMismatch(
            "networks have different variables or states".into(),
        ));
    }
    let size = truth.state_space_size();
    if size > ENUMERATE_LIMIT {
        return Err(Error::BudgetExceeded {
            what: "joint states to enumerate",
            needed: size,
            limit: ENUMERATE_LIMIT,
        });
    }
    let mut total = 0.0;
    for x in truth.assignments() {
        let p = truth.joint_unchecked(&x);
        if p == 0.0 {
            continue;
        }
        let lq = estimate.log_joint_unchecked(&x);
        if lq == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        total += p * (truth.log_joint_unchecked(&x) - lq);
    }
    Ok(total)
}

fn row_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// The same divergence through the chain rule, for networks sharing a DAG:
/// Σ_i Σ_pa P_truth(pa) · KL(truth row ‖ estimate row).
pub fn kl_decomposed(truth: &Network, estimate: &Network) -> Result<f64> {
    if !truth.same_structure(estimate) {
        return Err(Error::StructureMismatch(
            "decomposed divergence needs identical structures".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..truth.len() {
        let parents = &truth.node(i).parents;
        let weights = if parents.is_empty() {
            vec![1.0]
        } else {
            prior_marginal(truth, parents)
        };
        for (config, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                total += w * row_kl(truth.row(i, config), estimate.row(i, config));
            }
        }
    }
    Ok(total)
}

/// Mean squared difference over all CPT entries, each weighted equally.
pub fn mse(truth: &Network, estimate: &Network) -> Result<f64> {
    if !truth.same_structure(estimate) {
        return Err(Error::StructureMismatch(
            "parameter error needs identical structures".into(),
        ));
    }
    let (sum, count) = truth
        .cpts()
        .iter()
        .flatten()
        .zip(estimate.cpts().iter().flatten())
        .fold((0.0, 0usize), |(s, c), (a, b)| (s + (a - b) * (a - b), c + 1));
    Ok(sum / count as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KlMode {
    /// Decomposed when the structures match, enumeration otherwise.
    #[default]
    Auto,
    Enumerate,
    Decomposed,
}

impl std::str::FromStr for KlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(KlMode::Auto),
            "enumerate" => Ok(KlMode::Enumerate),
            "decomposed" => Ok(KlMode::Decomposed),
            other => Err(Error::Usage(format!("unknown divergence mode `{other}`"))),
        }
    }
}

pub fn kl(truth: &Network, estimate: &Network, mode: KlMode) -> Result<f64> {
    match mode {
        KlMode::Enumerate => kl_enumerate(truth, estimate),
        KlMode::Decomposed => kl_decomposed(truth, estimate),
        KlMode::Auto if truth.same_structure(estimate) => kl_decomposed(truth, estimate),
        KlMode::Auto => kl_enumerate(truth, estimate),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub ce: f64,
    pub mse: f64,
    pub pct_missing: f64,
}

/// Smooths the raw estimate with its row counts, then scores it.
pub fn evaluate(
    truth: &Network,
    raw: &Network,
    counts: &RowCounts,
    method: &str,
    pct_missing: f64,
    mode: KlMode,
) -> Result<EvalReport> {
    score_estimate(truth, &smooth(raw, counts), method, pct_missing, mode)
}

/// Scores an estimate as given (already smoothed, or deliberately raw).
/// The parameter error is NaN when the structures differ.
pub fn score_estimate(
    truth: &Network,
    estimate: &Network,
    method: &str,
    pct_missing: f64,
    mode: KlMode,
) -> Result<EvalReport> {
    Ok(EvalReport {
        method: method.to_string(),
        ce: kl(truth, estimate, mode)?,
        mse: if truth.same_structure(estimate) {
            mse(truth, estimate)?
        } else {
            f64::NAN
        },
        pct_missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary_kl(p: f64, q: f64) -> f64 {
        p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
    }

    #[test]
    fn basic_theta1_gap() {
        let truth = fixtures::basic();
        let theta1 = fixtures::basic_with(0.5, 0.15 / 0.55);
        let oracle = binary_kl(0.2, 0.15 / 0.55);
        let e = kl_enumerate(&truth, &theta1).unwrap();
        assert!((e - oracle).abs() < 1e-14);
        assert!((e - 0.0142).abs() < 5e-5, "{e}");
        assert!((kl_decomposed(&truth, &theta1).unwrap() - oracle).abs() < 1e-14);
        assert_eq!(kl_enumerate(&truth, &truth).unwrap(), 0.0);
    }

    #[test]
    fn zero_in_estimate_is_infinite() {
        let truth = fixtures::basic();
        let est = fixtures::basic_with(1.0, 0.2);
        assert_eq!(kl_enumerate(&truth, &est).unwrap(), f64::INFINITY);
        assert_eq!(kl_decomposed(&truth, &est).unwrap(), f64::INFINITY);
    }

    #[test]
    fn asia_decomposition_matches_enumeration() {
        let truth = fixtures::asia();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let est = truth.randomize_parameters(&mut rng);
            let a = kl_enumerate(&truth, &est).unwrap();
            let b = kl_decomposed(&truth, &est).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn mse_on_basic() {
        let truth = fixtures::basic();
        let theta1 = fixtures::basic_with(0.5, 0.2727);
        let oracle = 2.0 * (0.2727f64 - 0.2).powi(2) / 4.0;
        assert!((mse(&truth, &theta1).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.00264).abs() < 1e-5);
        assert!(matches!(mse(&truth, &fixtures::asia()), Err(Error::StructureMismatch(_))));
    }

    #[test]
    fn evaluate_smooths_first() {
        let truth = fixtures::asia();
        let mut huge = RowCounts::zeros(&truth);
        huge.0.iter_mut().flatten().for_each(|k| *k = 1e9);
        let r = evaluate(&truth, &truth, &huge, "self", 0.0, KlMode::Auto).unwrap();
        assert!(r.ce < 1e-4);
        // zero counts: every row becomes uniform
        let zero = RowCounts::zeros(&truth);
        let r = evaluate(&truth, &truth, &zero, "none", 0.0, KlMode::Enumerate).unwrap();
        let uniform = kl_enumerate(&truth, &truth.uniform()).unwrap();
        assert!((r.ce - uniform).abs() < 1e-12);
        // closed form: KL(P ‖ uniform) = ln|W| − H(P)
        let h: f64 = truth
            .assignments()
            .map(|x| truth.joint_unchecked(&x))
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum();
        assert!((uniform - (256f64.ln() - h)).abs() < 1e-12);
    }
}
