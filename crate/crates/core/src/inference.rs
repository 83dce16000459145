//! Exact inference by variable elimination.
//!
//! Evidence is a per-node slice of `Option<usize>` (`None` = unobserved).
//! Elimination order is greedy min-fill with ties broken by node name, so
//! results are reproducible across runs and platforms.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::network::{FullAssignment, Network, Odometer};

fn check_evidence(net: &Network, evidence: &[Option<usize>]) -> Result<()> {
    if evidence.len() != net.len() {
        return Err(Error::DimensionMismatch {
            expected: net.len(),
            got: evidence.len(),
        });
    }
    for (i, e) in evidence.iter().enumerate() {
        if let Some(s) = *e {
            let node = net.node(i);
            if s >= node.card() {
                return Err(Error::UnknownState {
                    variable: node.name.clone(),
                    state: s.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Greedy min-fill elimination order for `eliminate` given the factor scopes.
pub(crate) fn min_fill_order(net: &Network, scopes: &[Vec<usize>], eliminate: &[usize]) -> Vec<usize> {
    let n = net.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for scope in scopes {
        for &a in scope {
            for &b in scope {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: BTreeSet<usize> = eliminate.iter().copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, &str, usize)> = None;
        for &v in &remaining {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for (k, &a) in nb.iter().enumerate() {
                for &b in &nb[k + 1..] {
                    if !adj[a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            let name = net.node(v).name.as_str();
            let better = match best {
                None => true,
                Some((bf, bn, bv)) => (fill, name, v) < (bf, bn, bv),
            };
            if better {
                best = Some((fill, name, v));
            }
        }
        let v = best.expect("remaining is non-empty").2;
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nb {
            adj[a].remove(&v);
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// Unnormalized joint over the unobserved variables in `keep`, with every
/// other unobserved variable summed out: P(keep, evidence).
pub(crate) fn joint_marginal(net: &Network, evidence: &[Option<usize>], keep: &[usize]) -> Factor {
    let mut factors: Vec<Factor> = (0..net.len())
        .map(|i| Factor::from_cpt(net, i, evidence))
        .collect();
    let keep: BTreeSet<usize> = keep.iter().copied().filter(|&v| evidence[v].is_none()).collect();
    let elim: Vec<usize> = (0..net.len())
        .filter(|&v| evidence[v].is_none() && !keep.contains(&v))
        .collect();
    let scopes: Vec<Vec<usize>> = factors.iter().map(|f| f.vars.clone()).collect();
    for v in min_fill_order(net, &scopes, &elim) {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.binary_search(&v).is_ok());
        factors = rest;
        if let Some(prod) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(prod.sum_out(v));
        }
    }
    factors
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(&f))
}

/// P(X ∈ U) for the product-form observation `evidence`.
pub fn evidence_probability(net: &Network, evidence: &[Option<usize>]) -> Result<f64> {
    check_evidence(net, evidence)?;
    Ok(joint_marginal(net, evidence, &[]).total())
}

/// Marginal distribution of the variables in `vars` (no evidence), laid out
/// over `vars` in the given order with the last varying fastest.
pub fn prior_marginal(net: &Network, vars: &[usize]) -> Vec<f64> {
    let evidence = vec![None; net.len()];
    let f = joint_marginal(net, &evidence, vars);
    let cards: Vec<usize> = vars.iter().map(|&v| net.node(v).card()).collect();
    let mut x = vec![0; net.len()];
    Odometer::new(cards)
        .map(|local| {
            for (k, &v) in vars.iter().enumerate() {
                x[v] = local[k];
            }
            f.at(&x)
        })
        .collect()
}

/// For every node, P(node, parents | X ∈ U) laid out like its CPT
/// (`config * card + state`).
pub fn posterior_family_marginals(net: &Network, evidence: &[Option<usize>]) -> Result<Vec<Vec<f64>>> {
    check_evidence(net, evidence)?;
    let pe = joint_marginal(net, evidence, &[]).total();
    if !(pe > 0.0) {
        return Err(Error::ZeroEvidence(
            "observation has probability zero under the network".into(),
        ));
    }
    let mut out = Vec::with_capacity(net.len());
    for i in 0..net.len() {
        let mut family = net.node(i).parents.clone();
        family.push(i);
        let f = joint_marginal(net, evidence, &family);
        let card = net.node(i).card();
        let mut table = vec![0.0; net.num_rows(i) * card];
        let fam_cards: Vec<usize> = family.iter().map(|&v| net.node(v).card()).collect();
        let mut x: Vec<usize> = evidence.iter().map(|e| e.unwrap_or(0)).collect();
        for local in Odometer::new(fam_cards) {
            if family
                .iter()
                .zip(&local)
                .any(|(&v, &s)| evidence[v].is_some_and(|e| e != s))
            {
                continue;
            }
            for (k, &v) in family.iter().enumerate() {
                x[v] = local[k];
            }
            table[net.parent_config(i, &x) * card + x[i]] = f.at(&x) / pe;
        }
        out.push(table);
    }
    Ok(out)
}

/// Every full assignment compatible with `evidence`, in odometer order over
/// the unobserved positions.
pub fn completions<'a>(
    net: &'a Network,
    evidence: &'a [Option<usize>],
) -> impl Iterator<Item = FullAssignment> + 'a {
    let missing: Vec<usize> = (0..evidence.len()).filter(|&i| evidence[i].is_none()).collect();
    let base: Vec<usize> = evidence.iter().map(|e| e.unwrap_or(0)).collect();
    let cards: Vec<usize> = missing.iter().map(|&i| net.node(i).card()).collect();
    Odometer::new(cards).map(move |local| {
        let mut x = base.clone();
        for (k, &v) in missing.iter().enumerate() {
            x[v] = local[k];
        }
        x
    })
}

/// Number of full assignments compatible with `evidence`, as a float.
pub fn completion_count(net: &Network, evidence: &[Option<usize>]) -> f64 {
    evidence
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_none())
        .map(|(i, _)| net.node(i).card() as f64)
        .product()
}

/// Posterior over the completions of `evidence`, by enumeration. Returns the
/// (unnormalized) evidence probability alongside the normalized posterior;
/// the posterior is empty when the evidence has probability zero.
pub fn enumerate_posterior(net: &Network, evidence: &[Option<usize>]) -> Result<(f64, Vec<(FullAssignment, f64)>)> {
    check_evidence(net, evidence)?;
    let mut post: Vec<(FullAssignment, f64)> = completions(net, evidence)
        .map(|x| {
            let p = net.joint_unchecked(&x);
            (x, p)
        })
        .filter(|(_, p)| *p > 0.0)
        .collect();
    let pe: f64 = post.iter().map(|(_, p)| p).sum();
    if pe > 0.0 {
        for (_, p) in &mut post {
            *p /= pe;
        }
    }
    Ok((pe, post))
}
