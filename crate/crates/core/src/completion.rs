//! Empirical pattern distributions, data completions and the coarsening
//! mechanism implied by a completion.

use std::collections::BTreeMap;

use crate::data::{CoarseCase, Dataset};
use crate::error::{Error, Result};
use crate::inference;
use crate::network::{FullAssignment, Network};

/// Sparse distribution over full assignments.
pub type StateDistribution = BTreeMap<FullAssignment, f64>;

/// m: relative frequency of each distinct observed pattern, with H(m) in nats.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternDistribution {
    pub freq: BTreeMap<CoarseCase, f64>,
    pub entropy: f64,
}

impl PatternDistribution {
    pub fn get(&self, u: &CoarseCase) -> f64 {
        self.freq.get(u).copied().unwrap_or(0.0)
    }
}

pub fn empirical_pattern_distribution(data: &Dataset) -> PatternDistribution {
    let n = data.total_weight();
    let freq: BTreeMap<CoarseCase, f64> = data
        .grouped()
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(u, w)| (u, w / n))
        .collect();
    let entropy = -freq.values().map(|&p| p * p.ln()).sum::<f64>();
    PatternDistribution {
        freq,
        entropy: entropy.max(0.0),
    }
}

/// Every full assignment compatible with `case`.
pub fn compatible_assignments<'a>(
    case: &'a CoarseCase,
    net: &'a Network,
) -> impl Iterator<Item = FullAssignment> + 'a {
    inference::completions(net, case)
}

/// Per-case distributions over compatible full assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    per_case: Vec<Vec<(FullAssignment, f64)>>,
}

impl Completion {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(data: &Dataset, per_case: Vec<Vec<(FullAssignment, f64)>>) -> Result<Self> {
        if per_case.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                got: per_case.len(),
            });
        }
        for (i, (dist, (case, _))) in per_case.iter().zip(data.cases()).enumerate() {
            let sum: f64 = dist.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > Self::SUM_TOL || dist.iter().any(|(_, p)| *p < 0.0) {
                return Err(Error::Format(format!(
                    "completion of case {i} sums to {sum}, not 1"
                )));
            }
            if let Some((x, _)) = dist.iter().find(|(x, _)| !case.contains(x)) {
                return Err(Error::Format(format!(
                    "completion of case {i} puts mass on incompatible assignment {x:?}"
                )));
            }
        }
        Ok(Completion { per_case })
    }

    /// A 1-completion: one full assignment per case.
    pub fn one(data: &Dataset, xs: Vec<FullAssignment>) -> Result<Self> {
        Self::new(data, xs.into_iter().map(|x| vec![(x, 1.0)]).collect())
    }

    pub fn per_case(&self) -> &[Vec<(FullAssignment, f64)>] {
        &self.per_case
    }

    pub fn len(&self) -> usize {
        self.per_case.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_case.is_empty()
    }

    /// (1 − alpha)·self + alpha·other, case by case.
    pub fn mix(&self, other: &Completion, alpha: f64) -> Completion {
        let per_case = self
            .per_case
            .iter()
            .zip(&other.per_case)
            .map(|(a, b)| {
                let mut m: BTreeMap<FullAssignment, f64> = BTreeMap::new();
                for (x, p) in a {
                    *m.entry(x.clone()).or_insert(0.0) += (1.0 - alpha) * p;
                }
                for (x, p) in b {
                    *m.entry(x.clone()).or_insert(0.0) += alpha * p;
                }
                m.into_iter().filter(|(_, p)| *p > 0.0).collect()
            })
            .collect();
        Completion { per_case }
    }
}

/// P_c = (1/N) Σ_i w_i c(U_i).
pub fn completion_distribution(c: &Completion, data: &Dataset) -> Result<StateDistribution> {
    if c.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: c.len(),
        });
    }
    let n = data.total_weight();
    let mut out = StateDistribution::new();
    for (dist, (case, w)) in c.per_case().iter().zip(data.cases()) {
        for (x, p) in dist {
            if !case.contains(x) {
                return Err(Error::Format(format!(
                    "completion puts mass on {x:?}, incompatible with its case"
                )));
            }
            if *w * p > 0.0 {
                *out.entry(x.clone()).or_insert(0.0) += w * p / n;
            }
        }
    }
    Ok(out)
}

/// Explicit coarsening parameters λ_{x,U} for the patterns that matter.
///
/// Pairs not stored are zero, except that a state `x` with no stored row
/// implicitly reports its whole mass on the singleton pattern {x}.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseningModel {
    /// |W|.
    pub n_states: f64,
    lambdas: BTreeMap<FullAssignment, BTreeMap<CoarseCase, f64>>,
    /// Whether λ_{x,U} is constant over x ∈ U for every stored pattern.
    pub car: bool,
}

impl CoarseningModel {
    pub const ROW_TOL: f64 = 1e-9;

    pub fn lambda(&self, x: &[usize], u: &CoarseCase) -> f64 {
        match self.lambdas.get(x) {
            Some(row) => row.get(u).copied().unwrap_or(0.0),
            None if *u == CoarseCase::complete(x) => 1.0,
            None => 0.0,
        }
    }

    /// Σ_U λ_{x,U}.
    pub fn row_sum(&self, x: &[usize]) -> f64 {
        self.lambdas.get(x).map_or(1.0, |row| row.values().sum())
    }

    /// States with explicitly stored parameters.
    pub fn states(&self) -> impl Iterator<Item = &FullAssignment> {
        self.lambdas.keys()
    }

    /// P_{θ,λ}(Y = U) = Σ_{x∈U} P_θ(x) λ_{x,U}.
    pub fn pattern_probability(&self, net: &Network, u: &CoarseCase) -> f64 {
        compatible_assignments(u, net)
            .map(|x| net.joint_unchecked(&x) * self.lambda(&x, u))
            .sum()
    }

    /// Invariant violations: λ outside [0,1], nonzero λ_{x,U} with x ∉ U,
    /// rows not summing to one, and car-flag inconsistency.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (x, row) in &self.lambdas {
            for (u, &l) in row {
                if !(0.0..=1.0 + Self::ROW_TOL).contains(&l) {
                    out.push(format!("λ[{x:?},{u:?}] = {l} outside [0,1]"));
                }
                if l != 0.0 && !u.contains(x) {
                    out.push(format!("λ[{x:?},{u:?}] nonzero but x ∉ U"));
                }
            }
            let s: f64 = row.values().sum();
            if (s - 1.0).abs() > Self::ROW_TOL {
                out.push(format!("row {x:?} sums to {s}"));
            }
        }
        if self.car && !self.compute_car() {
            out.push("car flag set but λ varies within a pattern".into());
        }
        out
    }

    fn compute_car(&self) -> bool {
        let mut per_pattern: BTreeMap<&CoarseCase, f64> = BTreeMap::new();
        for row in self.lambdas.values() {
            for (u, &l) in row {
                if let Some(prev) = per_pattern.insert(u, l) {
                    if (prev - l).abs() > Self::ROW_TOL {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// The coarsening mechanism that makes `c` optimal: λ_{x,U} = m(U)·c̄_U(x)/P_c(x),
/// with c̄_U the weight-averaged completion of the cases showing U. Any mass
/// a state does not spend on observed patterns goes to its singleton {x}.
pub fn recover_coarsening(
    m: &PatternDistribution,
    c: &Completion,
    data: &Dataset,
    net: &Network,
) -> Result<CoarseningModel> {
    data.check_binds(net)?;
    let n_states = net.state_space_size();
    if n_states > (1u64 << 20) as f64 {
        return Err(Error::BudgetExceeded {
            what: "state space",
            needed: n_states,
            limit: (1u64 << 20) as f64,
        });
    }
    let pc = completion_distribution(c, data)?;
    // c̄_U(x) weighted by case weight
    let mut by_pattern: BTreeMap<&CoarseCase, (f64, BTreeMap<&FullAssignment, f64>)> = BTreeMap::new();
    for (dist, (case, w)) in c.per_case().iter().zip(data.cases()) {
        let entry = by_pattern.entry(case).or_default();
        entry.0 += w;
        for (x, p) in dist {
            *entry.1.entry(x).or_insert(0.0) += w * p;
        }
    }
    let mut lambdas: BTreeMap<FullAssignment, BTreeMap<CoarseCase, f64>> = BTreeMap::new();
    for (u, (wu, mass)) in by_pattern {
        if wu <= 0.0 {
            continue;
        }
        let mu = m.get(u);
        for (x, q) in mass {
            if q == 0.0 {
                continue;
            }
            let px = pc.get(x).copied().unwrap_or(0.0);
            if !(px > 0.0) {
                return Err(Error::ZeroSupport(format!("P_c({x:?}) = 0")));
            }
            let l = (mu * (q / wu) / px).min(1.0);
            *lambdas.entry(x.clone()).or_default().entry(u.clone()).or_insert(0.0) += l;
        }
    }
    for (x, row) in lambdas.iter_mut() {
        let spent: f64 = row.values().sum();
        let residual = 1.0 - spent;
        if residual > 0.0 {
            *row.entry(CoarseCase::complete(x)).or_insert(0.0) += residual;
        }
    }
    let mut model = CoarseningModel {
        n_states,
        lambdas,
        car: false,
    };
    model.car = model.compute_car();
    Ok(model)
}
