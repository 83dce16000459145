//! Face-value, profile(car) and profile(sat) log-likelihoods.
//!
//! Conventions: natural logarithms; `CE(P, Q)` means Σ P log(P/Q); per-case
//! values are totals divided by the dataset weight N.
//!
//! The profile(sat) value at θ is −H(m) − min_c CE(P_c, P_θ), minimized over
//! completions c. The minimization is convex; it is solved by exact block
//! coordinate descent where each block (one observed pattern) is a
//! water-filling problem with a closed-form solution.
//!
//! The car normalizer log f(U) = max Σ_U m(U) log λ_U, subject to
//! Σ_{U∋x} λ_U ≤ 1 for each state, is solved through its dual: a measure μ
//! on the states maximizing Σ_U m(U) log μ(U) − μ(W). The dual is fitted by
//! multiplicative (EM-type) scaling, and λ_U = m(U)/μ(U) rescaled onto the
//! feasible set gives the certificate; the duality gap is ln of that scale.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::completion::{empirical_pattern_distribution, Completion};
use crate::data::{CoarseCase, Dataset};
use crate::error::{Error, Result};
use crate::inference::{self, evidence_probability};
use crate::network::{FullAssignment, Network};

/// Ambiguity budget for the exact sat solver: total number of
/// (pattern, compatible assignment) pairs.
pub const SAT_AMBIGUITY_LIMIT: f64 = 1e5;
/// State-space budget for the car normalizer.
pub const CAR_STATE_LIMIT: f64 = (1u64 << 20) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LikelihoodKind {
    FaceValue,
    SatProfile,
    CarProfile,
}

impl LikelihoodKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LikelihoodKind::FaceValue => "fv",
            LikelihoodKind::SatProfile => "sat",
            LikelihoodKind::CarProfile => "car",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    /// Optimal completion for the profile(sat) value.
    Completion(Completion),
    /// Optimal λ_U per distinct observed pattern for the car normalizer.
    PatternLambdas(Vec<(CoarseCase, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodReport {
    pub kind: LikelihoodKind,
    /// Log-likelihood per unit case weight.
    pub per_case_average: f64,
    pub total: f64,
    pub total_weight: f64,
    pub certificate: Option<Certificate>,
}

impl LikelihoodReport {
    fn new(kind: LikelihoodKind, per_case: f64, n: f64, certificate: Option<Certificate>) -> Self {
        LikelihoodReport {
            kind,
            per_case_average: per_case,
            total: per_case * n,
            total_weight: n,
            certificate,
        }
    }

    pub fn completion(&self) -> Option<&Completion> {
        match &self.certificate {
            Some(Certificate::Completion(c)) => Some(c),
            _ => None,
        }
    }
}

/// Σ_i w_i log P_θ(X ∈ U_i). −∞ when a positive-weight case is impossible.
pub fn face_value_loglik(net: &Network, data: &Dataset) -> Result<LikelihoodReport> {
    data.check_binds(net)?;
    let n = data.total_weight();
    let mut total = 0.0;
    for (u, w) in data.grouped() {
        if w == 0.0 {
            continue;
        }
        let p = evidence_probability(net, &u)?;
        total += w * p.ln();
    }
    Ok(LikelihoodReport::new(LikelihoodKind::FaceValue, total / n, n, None))
}

/// How the sat solver's completion starts.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum SatInit {
    /// Uniform over each pattern's possible states.
    #[default]
    Uniform,
    /// Random point in each pattern's simplex.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SatOptions {
    /// Stop when a full sweep lowers the divergence by less than this.
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: SatInit,
}

impl Default for SatOptions {
    fn default() -> Self {
        SatOptions {
            tol: 1e-14,
            max_sweeps: 100_000,
            init: SatInit::Uniform,
        }
    }
}

struct SatProblem {
    states: Vec<FullAssignment>,
    prob: Vec<f64>,
    patterns: Vec<(CoarseCase, f64, Vec<usize>)>,
}

impl SatProblem {
    fn build(net: &Network, data: &Dataset) -> Result<Self> {
        let m = empirical_pattern_distribution(data);
        let ambiguity: f64 = m.freq.keys().map(|u| inference::completion_count(net, u)).sum();
        if ambiguity > SAT_AMBIGUITY_LIMIT {
            return Err(Error::BudgetExceeded {
                what: "compatible assignments over observed patterns",
                needed: ambiguity,
                limit: SAT_AMBIGUITY_LIMIT,
            });
        }
        let mut index: BTreeMap<FullAssignment, usize> = BTreeMap::new();
        let mut states = Vec::new();
        let mut patterns = Vec::with_capacity(m.freq.len());
        for (u, mu) in m.freq {
            let ids = inference::completions(net, &u)
                .map(|x| {
                    *index.entry(x.clone()).or_insert_with(|| {
                        states.push(x);
                        states.len() - 1
                    })
                })
                .collect();
            patterns.push((u, mu, ids));
        }
        let prob = states.iter().map(|x| net.joint_unchecked(x)).collect();
        Ok(SatProblem {
            states,
            prob,
            patterns,
        })
    }

    fn divergence(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(&self.prob)
            .map(|(&y, &p)| if y > 0.0 { y * (y / p).ln() } else { 0.0 })
            .sum()
    }
}

/// Exact minimizer over the simplex of Σ_x g(a_x + m q_x), g(y) = y ln(y/p_x):
/// y_x = max(a_x, t·p_x) with the level t fixed by Σ q = 1.
fn water_fill(a: &[f64], p: &[f64], m: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..a.len()).filter(|&k| p[k] > 0.0).collect();
    order.sort_by(|&i, &j| (a[i] / p[i]).total_cmp(&(a[j] / p[j])).then(i.cmp(&j)));
    let (mut sa, mut sp) = (0.0, 0.0);
    let mut level = 0.0;
    for (pos, &k) in order.iter().enumerate() {
        sa += a[k];
        sp += p[k];
        level = (m + sa) / sp;
        let next = order.get(pos + 1).map(|&j| a[j] / p[j]);
        if next.is_none_or(|r| level <= r) {
            break;
        }
    }
    let mut q: Vec<f64> = (0..a.len())
        .map(|k| if p[k] > 0.0 { ((level * p[k] - a[k]) / m).max(0.0) } else { 0.0 })
        .collect();
    let s: f64 = q.iter().sum();
    if s > 0.0 {
        q.iter_mut().for_each(|v| *v /= s);
    }
    q
}

/// Profile(sat) log-likelihood with default solver settings and the given
/// convergence tolerance.
pub fn exact_sat_profile_loglik(net: &Network, data: &Dataset, tol: f64) -> Result<LikelihoodReport> {
    exact_sat_profile_with(
        net,
        data,
        &SatOptions {
            tol,
            ..SatOptions::default()
        },
    )
}

pub fn exact_sat_profile_with(net: &Network, data: &Dataset, opts: &SatOptions) -> Result<LikelihoodReport> {
    data.check_binds(net)?;
    let n = data.total_weight();
    let entropy = empirical_pattern_distribution(data).entropy;
    let prob = SatProblem::build(net, data)?;

    let impossible = prob
        .patterns
        .iter()
        .any(|(_, _, ids)| ids.iter().all(|&s| prob.prob[s] == 0.0));
    if impossible {
        return Ok(LikelihoodReport::new(
            LikelihoodKind::SatProfile,
            f64::NEG_INFINITY,
            n,
            None,
        ));
    }

    let mut rng = match opts.init {
        SatInit::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        SatInit::Uniform => None,
    };
    let mut q: Vec<Vec<f64>> = prob
        .patterns
        .iter()
        .map(|(_, _, ids)| {
            let raw: Vec<f64> = ids
                .iter()
                .map(|&s| {
                    if prob.prob[s] == 0.0 {
                        0.0
                    } else if let Some(r) = rng.as_mut() {
                        r.gen::<f64>() + 1e-3
                    } else {
                        1.0
                    }
                })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut y = vec![0.0; prob.states.len()];
    for ((_, mu, ids), qu) in prob.patterns.iter().zip(&q) {
        for (&s, &v) in ids.iter().zip(qu) {
            y[s] += mu * v;
        }
    }

    let mut current = prob.divergence(&y);
    for _ in 0..opts.max_sweeps {
        for ((_, mu, ids), qu) in prob.patterns.iter().zip(q.iter_mut()) {
            if ids.len() == 1 {
                continue;
            }
            let a: Vec<f64> = ids
                .iter()
                .zip(qu.iter())
                .map(|(&s, &v)| (y[s] - mu * v).max(0.0))
                .collect();
            let p: Vec<f64> = ids.iter().map(|&s| prob.prob[s]).collect();
            let fresh = water_fill(&a, &p, *mu);
            for (k, &s) in ids.iter().enumerate() {
                y[s] = a[k] + mu * fresh[k];
            }
            *qu = fresh;
        }
        let next = prob.divergence(&y);
        let done = current - next < opts.tol;
        current = next.min(current);
        if done {
            break;
        }
    }
    // recompute P_c from the final blocks to drop drift in y
    let mut y = vec![0.0; prob.states.len()];
    for ((_, mu, ids), qu) in prob.patterns.iter().zip(&q) {
        for (&s, &v) in ids.iter().zip(qu) {
            y[s] += mu * v;
        }
    }
    let kl = prob.divergence(&y).max(0.0);

    let by_pattern: BTreeMap<&CoarseCase, Vec<(FullAssignment, f64)>> = prob
        .patterns
        .iter()
        .zip(&q)
        .map(|((u, _, ids), qu)| {
            let dist = ids
                .iter()
                .zip(qu)
                .filter(|(_, &v)| v > 0.0)
                .map(|(&s, &v)| (prob.states[s].clone(), v))
                .collect();
            (u, dist)
        })
        .collect();
    let per_case: Vec<Vec<(FullAssignment, f64)>> = data
        .cases()
        .iter()
        .map(|(u, _)| {
            by_pattern.get(u).cloned().unwrap_or_else(|| {
                // zero-weight case: any compatible state will do
                vec![(inference::completions(net, u).next().expect("nonempty"), 1.0)]
            })
        })
        .collect();
    let certificate = Completion::new(data, per_case)?;
    Ok(LikelihoodReport::new(
        LikelihoodKind::SatProfile,
        -entropy - kl,
        n,
        Some(Certificate::Completion(certificate)),
    ))
}

/// log f(U) per unit weight, with the optimal λ per observed pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct CarNormalizer {
    pub log_f_per_unit: f64,
    pub lambdas: Vec<(CoarseCase, f64)>,
    /// Duality gap of the returned certificate.
    pub gap: f64,
    pub iterations: usize,
}

pub const CAR_TOL: f64 = 1e-10;
const CAR_MAX_ITERS: usize = 2_000_000;

pub fn car_normalizer(data: &Dataset, net: &Network) -> Result<CarNormalizer> {
    data.check_binds(net)?;
    let m = empirical_pattern_distribution(data);
    let mut index: BTreeMap<FullAssignment, usize> = BTreeMap::new();
    let mut patterns: Vec<(CoarseCase, f64, Vec<usize>)> = Vec::new();
    let mut budget = 0.0;
    for (u, mu) in m.freq {
        budget += inference::completion_count(net, &u);
        if budget > CAR_STATE_LIMIT {
            return Err(Error::BudgetExceeded {
                what: "states covered by observed patterns",
                needed: budget,
                limit: CAR_STATE_LIMIT,
            });
        }
        let ids = inference::completions(net, &u)
            .map(|x| {
                let next = index.len();
                *index.entry(x).or_insert(next)
            })
            .collect();
        patterns.push((u, mu, ids));
    }
    let n_states = index.len();

    // start from an even split of each pattern's mass over its states
    let mut mu_x = vec![0.0; n_states];
    for (_, mu, ids) in &patterns {
        let share = mu / ids.len() as f64;
        for &s in ids {
            mu_x[s] += share;
        }
    }
    let mut pattern_mass = vec![0.0; patterns.len()];
    let mut load = vec![0.0; n_states];
    let mut iterations = 0;
    let gap = loop {
        for (k, (_, _, ids)) in patterns.iter().enumerate() {
            pattern_mass[k] = ids.iter().map(|&s| mu_x[s]).sum();
        }
        load.iter_mut().for_each(|v| *v = 0.0);
        for (k, (_, mu, ids)) in patterns.iter().enumerate() {
            let r = mu / pattern_mass[k];
            for &s in ids {
                load[s] += r;
            }
        }
        let scale = load.iter().copied().fold(0.0, f64::max);
        let gap = scale.ln() + mu_x.iter().sum::<f64>() - 1.0;
        if gap < CAR_TOL || iterations >= CAR_MAX_ITERS {
            break gap;
        }
        for (v, l) in mu_x.iter_mut().zip(&load) {
            *v *= l;
        }
        iterations += 1;
    };
    let scale = load.iter().copied().fold(0.0, f64::max);
    let lambdas: Vec<(CoarseCase, f64)> = patterns
        .iter()
        .zip(&pattern_mass)
        .map(|((u, mu, _), &mass)| (u.clone(), (mu / mass / scale).min(1.0)))
        .collect();
    let log_f = patterns
        .iter()
        .zip(&lambdas)
        .map(|((_, mu, _), (_, l))| mu * l.ln())
        .sum();
    Ok(CarNormalizer {
        log_f_per_unit: log_f,
        lambdas,
        gap: gap.max(0.0),
        iterations,
    })
}

/// Face-value log-likelihood plus the car normalizer.
pub fn car_profile_loglik(net: &Network, data: &Dataset) -> Result<LikelihoodReport> {
    let fv = face_value_loglik(net, data)?;
    let f = car_normalizer(data, net)?;
    Ok(LikelihoodReport::new(
        LikelihoodKind::CarProfile,
        fv.per_case_average + f.log_f_per_unit,
        fv.total_weight,
        Some(Certificate::PatternLambdas(f.lambdas)),
    ))
}

/// Tolerance below zero tolerated before [`lr_statistic`] reports that its
/// candidates cannot both be optimal.
pub const LR_NEGATIVE_TOL: f64 = 1e-9;

/// Per-unit likelihood-ratio statistic LL_sat(net_sat) − LL_car(net_car).
pub fn lr_statistic(net_sat: &Network, net_car: &Network, data: &Dataset) -> Result<f64> {
    let sat = exact_sat_profile_loglik(net_sat, data, 1e-14)?.per_case_average;
    let car = car_profile_loglik(net_car, data)?.per_case_average;
    let d = sat - car;
    if d.is_nan() {
        return Err(Error::Numerical("likelihood ratio is undefined".into()));
    }
    if d < -LR_NEGATIVE_TOL {
        return Err(Error::Numerical(format!(
            "negative likelihood ratio {d}: the sat candidate is worse than the car candidate"
        )));
    }
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn water_fill_matches_kkt() {
        let a = [0.05, 0.0, 0.3];
        let p = [0.1, 0.4, 0.2];
        let q = water_fill(&a, &p, 0.45);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // active states share the same ratio y/p, inactive ones sit above it
        let y: Vec<f64> = (0..3).map(|k| a[k] + 0.45 * q[k]).collect();
        let level = (0..3).filter(|&k| q[k] > 0.0).map(|k| y[k] / p[k]).collect::<Vec<_>>();
        for l in &level {
            assert!((l - level[0]).abs() < 1e-12);
        }
        for k in 0..3 {
            if q[k] == 0.0 {
                assert!(a[k] / p[k] >= level[0] - 1e-12);
            }
        }
    }

    #[test]
    fn basic_sat_value_and_certificate() {
        let data = fixtures::basic_ex21_data();
        let r = exact_sat_profile_loglik(&fixtures::basic(), &data, 1e-14).unwrap();
        assert!((r.per_case_average + 1.1059).abs() < 5e-5, "{}", r.per_case_average);
        let c = r.completion().unwrap();
        let u1 = &c.per_case()[0];
        let tt = u1.iter().find(|(x, _)| x == &vec![0, 0]).unwrap().1;
        assert!((tt - 1.0 / 9.0).abs() < 1e-9, "{tt}");
    }

    #[test]
    fn basic_face_value_at_fv_optimum() {
        let data = fixtures::basic_ex21_data();
        let theta1 = fixtures::basic_with(0.5, 0.15 / 0.55);
        let fv = face_value_loglik(&theta1, &data).unwrap();
        let oracle = 0.45 * 0.5f64.ln() + 0.15 * (0.5f64 * 0.15 / 0.55).ln() + 0.4 * (0.5f64 * 0.4 / 0.55).ln();
        assert!((fv.per_case_average - oracle).abs() < 1e-12);
        assert!((fv.per_case_average + 1.0154).abs() < 5e-5);
    }

    #[test]
    fn basic_car_normalizer() {
        let data = fixtures::basic_ex21_data();
        let f = car_normalizer(&data, &fixtures::basic()).unwrap();
        let oracle = 0.45 * 0.9f64.ln() + 0.05 * 0.1f64.ln();
        assert!((f.log_f_per_unit - oracle).abs() < 1e-9, "{f:?}");
        assert!(f.gap < CAR_TOL);
        let get = |u: CoarseCase| f.lambdas.iter().find(|(v, _)| *v == u).unwrap().1;
        assert!((get(CoarseCase(vec![Some(0), None])) - 0.9).abs() < 1e-9);
        assert!((get(CoarseCase(vec![Some(0), Some(0)])) - 0.1).abs() < 1e-9);
        assert!((get(CoarseCase(vec![Some(1), Some(0)])) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn basic_car_profile_and_lr() {
        let data = fixtures::basic_ex21_data();
        let theta1 = fixtures::basic_with(0.5, 0.15 / 0.55);
        let car = car_profile_loglik(&theta1, &data).unwrap();
        assert!((car.per_case_average + 1.1779).abs() < 1e-4, "{}", car.per_case_average);
        let lr = lr_statistic(&fixtures::basic(), &theta1, &data).unwrap();
        assert!((lr - 0.0720).abs() < 1e-4, "{lr}");
        // swapping the candidates makes the statistic negative
        assert!(matches!(
            lr_statistic(&fixtures::basic_with(0.9, 0.9), &theta1, &data),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn complete_data_all_three_agree() {
        let net = fixtures::asia();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs = net.sample(300, &mut rng);
        let data = Dataset::from_complete(&net, &xs).unwrap();
        let est = net.randomize_parameters(&mut rng);
        let fv = face_value_loglik(&est, &data).unwrap().per_case_average;
        let sat = exact_sat_profile_loglik(&est, &data, 1e-14).unwrap().per_case_average;
        let car = car_profile_loglik(&est, &data).unwrap().per_case_average;
        assert!((fv - sat).abs() < 1e-12);
        assert!((fv - car).abs() < 1e-12);
        assert_eq!(car_normalizer(&data, &net).unwrap().log_f_per_unit, 0.0);
        assert_eq!(lr_statistic(&est, &est, &data).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_patterns_have_zero_normalizer() {
        let net = fixtures::basic();
        let data = Dataset::new(
            &net,
            vec![
                (CoarseCase(vec![Some(0), None]), 1.0),
                (CoarseCase(vec![Some(1), None]), 3.0),
            ],
        )
        .unwrap();
        assert!(car_normalizer(&data, &net).unwrap().log_f_per_unit.abs() < 1e-12);
    }

    #[test]
    fn zero_probability_pattern_gives_minus_infinity() {
        let data = fixtures::basic_ex21_data();
        let net = fixtures::basic_with(1.0, 0.5);
        assert_eq!(face_value_loglik(&net, &data).unwrap().per_case_average, f64::NEG_INFINITY);
        assert_eq!(
            exact_sat_profile_loglik(&net, &data, 1e-12).unwrap().per_case_average,
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn budget_is_enforced() {
        let net = fixtures::asia();
        let data = Dataset::new(&net, vec![(CoarseCase(vec![None; 8]), 1.0)]).unwrap();
        assert!(exact_sat_profile_loglik(&net, &data, 1e-12).is_ok());
        let specs: Vec<_> = (0..18)
            .map(|i| crate::network::NodeSpec::new(&format!("v{i}"), &["a", "b"], &[]))
            .collect();
        let wide = Network::new("wide", specs, vec![vec![0.5, 0.5]; 18]).unwrap();
        let data = Dataset::new(&wide, vec![(CoarseCase(vec![None; 18]), 1.0)]).unwrap();
        assert!(matches!(
            exact_sat_profile_loglik(&wide, &data, 1e-12),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
