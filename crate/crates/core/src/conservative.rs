//! Conservative estimation: estimates from random completions of the data,
//! their componentwise envelope, and exact bounds for single-variable
//! marginals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::completion::Completion;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learn::{ml_estimate, smooth};
use crate::network::{FullAssignment, Network};
use crate::seed::derive_seed;

/// Fills every missing value uniformly over its domain.
pub fn random_completion<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Completion {
    let xs: Vec<FullAssignment> = data
        .cases()
        .iter()
        .map(|(u, _)| {
            u.iter()
                .enumerate()
                .map(|(i, e)| e.unwrap_or_else(|| rng.gen_range(0..data.states()[i].len())))
                .collect()
        })
        .collect();
    Completion::one(data, xs).expect("uniform fills are compatible")
}

/// Smoothed estimates from R random completions with their componentwise
/// [min, max] envelope. The envelope is an inner approximation of the full
/// set estimate: it only covers the completions actually sampled.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub estimates: Vec<Network>,
    pub low: Vec<Vec<f64>>,
    pub high: Vec<Vec<f64>>,
}

impl Ensemble {
    /// Interval centres, shaped like the CPTs. Rows need not sum to one.
    pub fn midpoints(&self) -> Vec<Vec<f64>> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| l.iter().zip(h).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect()
    }

    /// Midpoints with each row renormalized, as a network.
    pub fn midpoint_network(&self) -> Network {
        let base = &self.estimates[0];
        let cpts = self
            .midpoints()
            .into_iter()
            .enumerate()
            .map(|(i, cpt)| {
                let card = base.node(i).card();
                cpt.chunks(card)
                    .flat_map(|row| {
                        let s: f64 = row.iter().sum();
                        row.iter().map(move |v| v / s).collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        base.with_cpts_unchecked(cpts)
    }
}

/// Fits `structure` to `restarts` independent uniform completions. Member r
/// uses a seed derived from (`seed`, r), so the result does not depend on
/// scheduling.
pub fn conservative_ensemble(structure: &Network, data: &Dataset, restarts: usize, seed: u64) -> Result<Ensemble> {
    if restarts == 0 {
        return Err(Error::InvalidSpec("at least one completion is required".into()));
    }
    data.check_binds(structure)?;
    let estimates: Vec<Network> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            let c = random_completion(data, &mut rng);
            let (raw, k) = ml_estimate(
                structure,
                c.per_case()
                    .iter()
                    .zip(data.cases())
                    .map(|(d, (_, w))| (d[0].0.as_slice(), *w)),
            );
            smooth(&raw, &k)
        })
        .collect();
    let mut low: Vec<Vec<f64>> = estimates[0].cpts().to_vec();
    let mut high = low.clone();
    for e in &estimates[1..] {
        for (i, cpt) in e.cpts().iter().enumerate() {
            for (k, &v) in cpt.iter().enumerate() {
                low[i][k] = low[i][k].min(v);
                high[i][k] = high[i][k].max(v);
            }
        }
    }
    Ok(Ensemble { estimates, low, high })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub low: f64,
    pub high: f64,
    pub mid: f64,
}

/// Exact bounds on P(variable = state) over all completions of the data.
pub fn marginal_bounds(data: &Dataset, variable: &str, state: &str) -> Result<Bounds> {
    let i = data
        .variables()
        .iter()
        .position(|v| v == variable)
        .ok_or_else(|| Error::UnknownVariable(variable.to_string()))?;
    let s = data.states()[i]
        .iter()
        .position(|v| v == state)
        .ok_or_else(|| Error::UnknownState {
            variable: variable.to_string(),
            state: state.to_string(),
        })?;
    let n = data.total_weight();
    let (mut known, mut missing) = (0.0, 0.0);
    for (u, w) in data.cases() {
        match u[i] {
            Some(v) if v == s => known += w,
            Some(_) => {}
            None => missing += w,
        }
    }
    let low = known / n;
    let high = (known + missing) / n;
    Ok(Bounds {
        low,
        high,
        mid: 0.5 * (low + high),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CoarseCase;
    use crate::fixtures;

    fn basic_integer() -> Dataset {
        let net = fixtures::basic();
        Dataset::new(
            &net,
            vec![
                (CoarseCase(vec![Some(0), None]), 900.0),
                (CoarseCase(vec![Some(0), Some(0)]), 100.0),
                (CoarseCase(vec![Some(1), Some(0)]), 200.0),
                (CoarseCase(vec![Some(1), Some(1)]), 800.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn basic_bounds() {
        let data = fixtures::basic_ex21_data();
        let b = marginal_bounds(&data, "B", "t").unwrap();
        assert!((b.low - 0.15).abs() < 1e-12 && (b.high - 0.6).abs() < 1e-12);
        assert!((b.mid - 0.375).abs() < 1e-12);
        let a = marginal_bounds(&data, "A", "t").unwrap();
        assert!((a.low - 0.5).abs() < 1e-12 && (a.high - 0.5).abs() < 1e-12);
        assert!(matches!(marginal_bounds(&data, "C", "t"), Err(Error::UnknownVariable(_))));
        assert!(matches!(marginal_bounds(&data, "A", "x"), Err(Error::UnknownState { .. })));
    }

    #[test]
    fn uniform_fill_is_about_half() {
        let net = fixtures::basic();
        let data = Dataset::new(&net, vec![(CoarseCase(vec![Some(0), None]), 1.0); 20_000]).unwrap();
        let c = random_completion(&data, &mut ChaCha8Rng::seed_from_u64(4));
        let tt = c.per_case().iter().filter(|d| d[0].0[1] == 0).count() as f64 / 20_000.0;
        assert!((tt - 0.5).abs() < 0.015, "{tt}");
    }

    #[test]
    fn basic_ensemble_stays_inside_exact_bounds() {
        let net = fixtures::basic();
        let data = basic_integer();
        let e = conservative_ensemble(&net, &data, 50, 11).unwrap();
        assert_eq!(e.estimates.len(), 50);
        for est in &e.estimates {
            assert!(est.cpt(1)[0] >= 0.15 && est.cpt(1)[0] <= 0.6);
            assert!((est.cpt(0)[0] - 0.5).abs() < 1e-3);
        }
        assert!(e.high[1][0] - e.low[1][0] < 0.45);
        let again = conservative_ensemble(&net, &data, 50, 11).unwrap();
        assert_eq!(e.low, again.low);
        assert!(e.midpoint_network().validate().is_empty());
    }

    #[test]
    fn complete_data_gives_zero_width() {
        let net = fixtures::asia();
        let xs = net.sample(100, &mut ChaCha8Rng::seed_from_u64(1));
        let data = Dataset::from_complete(&net, &xs).unwrap();
        let e = conservative_ensemble(&net, &data, 5, 0).unwrap();
        assert_eq!(e.low, e.high);
    }
}
