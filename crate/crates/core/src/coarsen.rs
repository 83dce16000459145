//! Synthetic not-at-random missingness.
//!
//! Each variable `V` gets a binary observation node `obsV` (states
//! `true,false`) whose parents are `V` plus up to `mp` further nodes drawn
//! from the original variables and earlier observation nodes. Every row of
//! an observation CPT draws P(obsV = false) from a Beta law with mean `mu`
//! and variance `sigma`. Sampling the augmented network and deleting `V`
//! whenever `obsV = false` yields the incomplete dataset.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::data::{CoarseCase, Dataset};
use crate::error::{Error, Result};
use crate::network::{Network, NodeSpec};

/// Generator settings, written `mp:mu:sigma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoarseningSpec {
    /// Maximum number of extra parents per observation node.
    pub mp: usize,
    /// Expected probability that a value is deleted.
    pub mu: f64,
    /// Variance of the per-row deletion probability.
    pub sigma: f64,
}

impl CoarseningSpec {
    pub fn new(mp: usize, mu: f64, sigma: f64) -> Result<Self> {
        let spec = CoarseningSpec { mp, mu, sigma };
        spec.law()?;
        Ok(spec)
    }

    pub fn law(&self) -> Result<ObservationLaw> {
        beta_from_mean_variance(self.mu, self.sigma)
    }
}

impl FromStr for CoarseningSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::InvalidSpec(format!("`{s}` is not of the form mp:mu:sigma"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mp = parts[0].parse().map_err(|_| bad())?;
        let mu = parts[1].parse().map_err(|_| bad())?;
        let sigma = parts[2].parse().map_err(|_| bad())?;
        CoarseningSpec::new(mp, mu, sigma)
    }
}

impl fmt::Display for CoarseningSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.mp, self.mu, self.sigma)
    }
}

/// Distribution of P(obsV = false | conf) for one CPT row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObservationLaw {
    /// sigma = 0: every row equals `mu`, so the mechanism is MAR.
    PointMass(f64),
    Beta { alpha: f64, beta: f64 },
}

impl ObservationLaw {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ObservationLaw::PointMass(p) => p,
            ObservationLaw::Beta { alpha, beta } => {
                let d = Beta::new(alpha, beta).expect("shape parameters checked at construction");
                d.sample(rng).clamp(0.0, 1.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ObservationLaw::PointMass(p) => p,
            ObservationLaw::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }
}

/// Beta shape parameters with the given mean and variance:
/// α = μν, β = (1−μ)ν with ν = μ(1−μ)/σ − 1.
pub fn beta_from_mean_variance(mu: f64, sigma: f64) -> Result<ObservationLaw> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidSpec(format!("mu = {mu} outside [0,1]")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidSpec(format!("sigma = {sigma} is negative")));
    }
    if sigma == 0.0 {
        return Ok(ObservationLaw::PointMass(mu));
    }
    let max = mu * (1.0 - mu);
    if !(sigma < max) {
        return Err(Error::InvalidSpec(format!(
            "sigma = {sigma} must be below mu(1-mu) = {max}"
        )));
    }
    let nu = max / sigma - 1.0;
    Ok(ObservationLaw::Beta {
        alpha: mu * nu,
        beta: (1.0 - mu) * nu,
    })
}

/// A network whose first `k` nodes are the original variables, extended by
/// one observation node per variable.
#[derive(Clone, Debug)]
pub struct CoarseningNetwork {
    augmented: Network,
    original: Network,
    obs: Vec<usize>,
}

pub const OBS_TRUE: usize = 0;
pub const OBS_FALSE: usize = 1;

fn obs_name(var: &str, taken: &dyn Fn(&str) -> bool) -> String {
    let mut name = format!("obs{var}");
    while taken(&name) {
        name.push('_');
    }
    name
}

impl CoarseningNetwork {
    /// Wraps an augmented network whose first `k` nodes are the originals
    /// and which has an `obs<Name>` node with parent `<Name>` for each.
    pub fn from_augmented(augmented: Network, k: usize) -> Result<Self> {
        if k > augmented.len() {
            return Err(Error::StructureMismatch(format!(
                "network has {} nodes, expected at least {k}",
                augmented.len()
            )));
        }
        let mut specs = Vec::with_capacity(k);
        for i in 0..k {
            let node = augmented.node(i);
            if node.parents.iter().any(|&p| p >= k) {
                return Err(Error::StructureMismatch(format!(
                    "original node `{}` has an observation-node parent",
                    node.name
                )));
            }
            specs.push(NodeSpec {
                name: node.name.clone(),
                states: node.states.clone(),
                parents: node.parents.iter().map(|&p| augmented.node(p).name.clone()).collect(),
            });
        }
        let original = Network::new(
            augmented.name(),
            specs,
            (0..k).map(|i| augmented.cpt(i).to_vec()).collect(),
        )?;
        let mut obs = Vec::with_capacity(k);
        for i in 0..k {
            let var = &augmented.node(i).name;
            let name = obs_name(var, &|n| original.node_index(n).is_some());
            let j = augmented
                .node_index(&name)
                .ok_or_else(|| Error::StructureMismatch(format!("no observation node `{name}`")))?;
            let node = augmented.node(j);
            if node.card() != 2 || !node.parents.contains(&i) {
                return Err(Error::StructureMismatch(format!(
                    "`{name}` must be binary with parent `{var}`"
                )));
            }
            obs.push(j);
        }
        Ok(CoarseningNetwork {
            augmented,
            original,
            obs,
        })
    }

    pub fn augmented(&self) -> &Network {
        &self.augmented
    }

    /// The original variables with their CPTs, as a standalone network.
    pub fn original(&self) -> &Network {
        &self.original
    }

    /// Index (in the augmented network) of the observation node for
    /// original variable `i`.
    pub fn obs_node(&self, i: usize) -> usize {
        self.obs[i]
    }
}

/// Extends `net` with randomly wired observation nodes.
pub fn build_coarsening_network<R: Rng + ?Sized>(
    net: &Network,
    spec: &CoarseningSpec,
    rng: &mut R,
) -> Result<CoarseningNetwork> {
    let law = spec.law()?;
    let k = net.len();
    let mut specs: Vec<NodeSpec> = net
        .nodes()
        .iter()
        .map(|n| NodeSpec {
            name: n.name.clone(),
            states: n.states.clone(),
            parents: n.parents.iter().map(|&p| net.node(p).name.clone()).collect(),
        })
        .collect();
    let mut cpts: Vec<Vec<f64>> = net.cpts().to_vec();
    let mut cards: Vec<usize> = net.cards();
    let obs_names: Vec<String> = (0..k)
        .map(|i| obs_name(&net.node(i).name, &|n| net.node_index(n).is_some()))
        .collect();
    for i in 0..k {
        // candidates: the other originals, then obs nodes created so far
        let candidates: Vec<usize> = (0..k).filter(|&j| j != i).chain(k..k + i).collect();
        let want = rng.gen_range(0..=spec.mp).min(candidates.len());
        let mut extra: Vec<usize> = index::sample(rng, candidates.len(), want)
            .into_iter()
            .map(|c| candidates[c])
            .collect();
        extra.sort_unstable();
        let mut parents = vec![i];
        parents.extend(extra);
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let mut cpt = Vec::with_capacity(rows * 2);
        for _ in 0..rows {
            let p_false = law.draw(rng);
            cpt.push(1.0 - p_false);
            cpt.push(p_false);
        }
        specs.push(NodeSpec {
            name: obs_names[i].clone(),
            states: vec!["true".into(), "false".into()],
            parents: parents
                .iter()
                .map(|&p| if p < k { net.node(p).name.clone() } else { obs_names[p - k].clone() })
                .collect(),
        });
        cpts.push(cpt);
        cards.push(2);
    }
    let augmented = Network::new(&format!("{}_coarsened", net.name()), specs, cpts)?;
    CoarseningNetwork::from_augmented(augmented, k)
}

/// Samples `n` unit-weight cases over the original variables, hiding `V`
/// whenever `obsV = false`. Also returns the realized missing-cell fraction.
pub fn generate_dataset<R: Rng + ?Sized>(
    cn: &CoarseningNetwork,
    n: usize,
    rng: &mut R,
) -> Result<(Dataset, f64)> {
    let k = cn.original.len();
    let cases: Vec<(CoarseCase, f64)> = cn
        .augmented
        .sample(n, rng)
        .into_iter()
        .map(|x| {
            let case = (0..k)
                .map(|i| (x[cn.obs[i]] == OBS_TRUE).then_some(x[i]))
                .collect();
            (CoarseCase(case), 1.0)
        })
        .collect();
    let data = Dataset::new(&cn.original, cases)?;
    let frac = data.missing_fraction();
    Ok((data, frac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn beta_shapes() {
        match beta_from_mean_variance(0.1, 0.05).unwrap() {
            ObservationLaw::Beta { alpha, beta } => {
                assert!((alpha - 0.08).abs() < 1e-12 && (beta - 0.72).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        match beta_from_mean_variance(0.5, 0.125).unwrap() {
            ObservationLaw::Beta { alpha, beta } => {
                assert!((alpha - 0.5).abs() < 1e-12 && (beta - 0.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let pm = beta_from_mean_variance(0.1, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| pm.draw(&mut rng) == 0.1));
        assert!(matches!(beta_from_mean_variance(0.1, 0.1 * 0.9), Err(Error::InvalidSpec(_))));
        assert!(matches!(beta_from_mean_variance(0.1, 0.2), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_string_round_trip() {
        let s: CoarseningSpec = "2:0.1:0.05".parse().unwrap();
        assert_eq!(s, CoarseningSpec { mp: 2, mu: 0.1, sigma: 0.05 });
        assert_eq!(s.to_string(), "2:0.1:0.05");
        assert!("2:0.1".parse::<CoarseningSpec>().is_err());
        assert!("2:0.1:0.5".parse::<CoarseningSpec>().is_err());
    }

    #[test]
    fn mp_zero_gives_self_parent_only() {
        let net = fixtures::asia();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cn = build_coarsening_network(&net, &"0:0.1:0.05".parse().unwrap(), &mut rng).unwrap();
        for i in 0..net.len() {
            assert_eq!(cn.augmented().node(cn.obs_node(i)).parents, vec![i]);
        }
    }

    #[test]
    fn sigma_zero_rows_are_identical() {
        let net = fixtures::asia();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cn = build_coarsening_network(&net, &"3:0.2:0".parse().unwrap(), &mut rng).unwrap();
        for i in 0..net.len() {
            let o = cn.obs_node(i);
            for r in 0..cn.augmented().num_rows(o) {
                assert_eq!(cn.augmented().row(o, r), &[0.8, 0.2]);
            }
        }
    }

    #[test]
    fn augmentation_is_deterministic_acyclic_and_preserves_originals() {
        let net = fixtures::basic();
        let spec: CoarseningSpec = "2:0.1:0.05".parse().unwrap();
        let a = build_coarsening_network(&net, &spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = build_coarsening_network(&net, &spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.augmented(), b.augmented());
        assert!(a.augmented().validate().is_empty());
        assert_eq!(a.original(), &net.clone().renamed(a.augmented().name()));
        for i in 0..net.len() {
            assert_eq!(a.augmented().cpt(i), net.cpt(i));
            let parents = &a.augmented().node(a.obs_node(i)).parents;
            assert_eq!(parents[0], i);
            // obs parents only among originals and earlier obs nodes
            assert!(parents.iter().all(|&p| p < net.len() || p < a.obs_node(i)));
        }
    }

    #[test]
    fn missing_rates() {
        let net = fixtures::basic();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cn = build_coarsening_network(&net, &"1:0.1:0".parse().unwrap(), &mut rng).unwrap();
        let (_, frac) = generate_dataset(&cn, 100_000, &mut rng).unwrap();
        // 2e5 Bernoulli(0.1) cells: 99% half-width ≈ 0.0017
        assert!((frac - 0.1).abs() < 0.004, "{frac}");

        let cn = build_coarsening_network(&net, &"1:0:0".parse().unwrap(), &mut rng).unwrap();
        let (d, frac) = generate_dataset(&cn, 500, &mut rng).unwrap();
        assert!(d.is_complete() && frac == 0.0);

        let cn = build_coarsening_network(&net, &"1:1:0".parse().unwrap(), &mut rng).unwrap();
        let (d, frac) = generate_dataset(&cn, 500, &mut rng).unwrap();
        assert_eq!(frac, 1.0);
        assert!(d.cases().iter().all(|(c, _)| c.missing_count() == 2));
    }

    #[test]
    fn fixed_basic_mechanism_pattern_rates() {
        let cn = fixtures::basic_coarsening();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, _) = generate_dataset(&cn, 200_000, &mut rng).unwrap();
        let g = d.grouped();
        let u1 = g[&CoarseCase(vec![Some(0), None])] / 200_000.0;
        assert!((u1 - 0.45).abs() < 0.005, "{u1}");
        assert!(!g.contains_key(&CoarseCase(vec![Some(1), None])));
    }
}
