//! Alternating adjusted imputation and maximization.
//!
//! Each case is replicated `z` times and every replica carries one full
//! assignment, so the completion puts mass on states in units of 1/z. The AI
//! step walks the replicas once, moving each to the single-coordinate
//! neighbour that lowers KL(P_c ‖ P_θ) most; the M step refits θ by maximum
//! likelihood on the completed data.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::completion::empirical_pattern_distribution;
use crate::data::{CoarseCase, Dataset};
use crate::error::{Error, Result};
use crate::inference;
use crate::learn::{ml_estimate, smooth, RowCounts};
use crate::network::{sample_index, FullAssignment, Network};

/// Probability floor used when scoring states inside the AI step.
pub const PROB_FLOOR: f64 = 1e-300;
/// Moves between full recomputations of the tracked divergence.
pub const REFRESH_EVERY: usize = 1000;
/// Patterns with at most this many completions are sampled by enumeration.
const ENUMERATE_LIMIT: f64 = 4096.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitPolicy {
    /// Missing values drawn jointly from the posterior under θ_0.
    #[default]
    PosteriorDraw,
    /// Each missing value drawn uniformly from its domain.
    UniformDraw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AimOptions {
    pub z: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub sweeps_per_ai_step: usize,
    pub init_policy: InitPolicy,
    pub seed: u64,
}

impl Default for AimOptions {
    fn default() -> Self {
        AimOptions {
            z: 5,
            tol: 1e-6,
            max_iters: 200,
            sweeps_per_ai_step: 1,
            init_policy: InitPolicy::PosteriorDraw,
            seed: 0,
        }
    }
}

impl AimOptions {
    pub fn check(&self) -> Result<()> {
        if self.z == 0 {
            return Err(Error::InvalidSpec("replication factor z must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.sweeps_per_ai_step == 0 {
            return Err(Error::InvalidSpec("sweeps per AI step must be at least 1".into()));
        }
        Ok(())
    }
}

fn floored_log(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// Counts of completed replicas per state with KL(P_c ‖ P_θ) kept up to
/// date move by move.
#[derive(Clone, Debug)]
pub struct KlTracker {
    theta: Network,
    total: f64,
    counts: BTreeMap<FullAssignment, u64>,
    logp: HashMap<FullAssignment, f64>,
    kl: f64,
    since_refresh: usize,
}

impl KlTracker {
    pub fn new<'a, I>(theta: &Network, assignments: I) -> Self
    where
        I: IntoIterator<Item = &'a FullAssignment>,
    {
        let mut counts = BTreeMap::new();
        for x in assignments {
            *counts.entry(x.clone()).or_insert(0) += 1;
        }
        let total = counts.values().sum::<u64>() as f64;
        let mut t = KlTracker {
            theta: theta.clone(),
            total,
            counts,
            logp: HashMap::new(),
            kl: 0.0,
            since_refresh: 0,
        };
        t.kl = t.full_kl();
        t
    }

    pub fn theta(&self) -> &Network {
        &self.theta
    }

    pub fn counts(&self) -> &BTreeMap<FullAssignment, u64> {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Replaces θ and recomputes the divergence.
    pub fn set_theta(&mut self, theta: &Network) {
        self.theta = theta.clone();
        self.logp.clear();
        self.kl = self.full_kl();
        self.since_refresh = 0;
    }

    fn log_prob(&mut self, x: &FullAssignment) -> f64 {
        if let Some(&v) = self.logp.get(x) {
            return v;
        }
        let v = floored_log(self.theta.joint_unchecked(x));
        self.logp.insert(x.clone(), v);
        v
    }

    fn term(&self, n: u64, lp: f64) -> f64 {
        if n == 0 {
            0.0
        } else {
            let q = n as f64 / self.total;
            q * (q.ln() - lp)
        }
    }

    /// Divergence as currently tracked.
    pub fn kl(&self) -> f64 {
        self.kl
    }

    /// Divergence recomputed from scratch.
    pub fn full_kl(&self) -> f64 {
        self.counts
            .iter()
            .map(|(x, &n)| {
                let lp = self
                    .logp
                    .get(x)
                    .copied()
                    .unwrap_or_else(|| floored_log(self.theta.joint_unchecked(x)));
                self.term(n, lp)
            })
            .sum()
    }

    /// Change in divergence from moving one replica from `from` to `to`;
    /// only the two affected terms are evaluated.
    pub fn delta(&mut self, from: &FullAssignment, to: &FullAssignment) -> Result<f64> {
        let nf = self.counts.get(from).copied().unwrap_or(0);
        if nf == 0 {
            return Err(Error::InvalidSpec("no replica sits on the source state".into()));
        }
        if from == to {
            return Ok(0.0);
        }
        let nt = self.counts.get(to).copied().unwrap_or(0);
        let lf = self.log_prob(from);
        let lt = self.log_prob(to);
        Ok(self.term(nf - 1, lf) - self.term(nf, lf) + self.term(nt + 1, lt) - self.term(nt, lt))
    }

    /// Moves one replica and updates the tracked divergence.
    pub fn apply_move(&mut self, from: &FullAssignment, to: &FullAssignment) -> Result<f64> {
        let d = self.delta(from, to)?;
        if from == to {
            return Ok(0.0);
        }
        let nf = self.counts.get_mut(from).expect("checked by delta");
        *nf -= 1;
        if *nf == 0 {
            self.counts.remove(from);
        }
        *self.counts.entry(to.clone()).or_insert(0) += 1;
        self.kl += d;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.kl = self.full_kl();
            self.since_refresh = 0;
        }
        Ok(d)
    }
}

/// One row of the AI&M trace.
#[derive(Clone, Debug, PartialEq)]
pub struct AimIteration {
    pub iteration: usize,
    /// KL(P_{c_t} ‖ P_{θ_t}) after the AI step.
    pub score_after_ai: f64,
    /// KL(P_{c_t} ‖ P_{θ_{t+1}}) after the M step.
    pub score_after_m: f64,
    /// −H(m) − score_after_ai: a lower bound on the per-case sat profile
    /// log-likelihood at θ_t.
    pub sat_lower_bound: f64,
    pub moves: usize,
}

/// Replicated cases with their current 1-completion.
#[derive(Clone, Debug)]
pub struct AimState {
    replicas: Vec<CoarseCase>,
    assignment: Vec<FullAssignment>,
    tracker: KlTracker,
    z: usize,
}

impl AimState {
    pub fn new(theta: &Network, replicas: Vec<CoarseCase>, assignment: Vec<FullAssignment>, z: usize) -> Self {
        let tracker = KlTracker::new(theta, &assignment);
        AimState {
            replicas,
            assignment,
            tracker,
            z,
        }
    }

    pub fn replicas(&self) -> &[CoarseCase] {
        &self.replicas
    }

    pub fn assignment(&self) -> &[FullAssignment] {
        &self.assignment
    }

    pub fn tracker(&self) -> &KlTracker {
        &self.tracker
    }

    pub fn score(&self) -> f64 {
        self.tracker.full_kl()
    }

    /// One pass over the replicas in order; returns the number of moves made.
    pub fn ai_sweep(&mut self) -> usize {
        let mut moves = 0;
        for j in 0..self.replicas.len() {
            let missing = self.replicas[j].missing_positions();
            if missing.is_empty() {
                continue;
            }
            let current = self.assignment[j].clone();
            let mut best: Option<(f64, FullAssignment)> = None;
            for &v in &missing {
                for s in 0..self.tracker.theta.node(v).card() {
                    if s == current[v] {
                        continue;
                    }
                    let mut cand = current.clone();
                    cand[v] = s;
                    let d = self.tracker.delta(&current, &cand).expect("replica is counted");
                    if d < 0.0 && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, cand));
                    }
                }
            }
            if let Some((_, cand)) = best {
                self.tracker.apply_move(&current, &cand).expect("replica is counted");
                self.assignment[j] = cand;
                moves += 1;
            }
        }
        moves
    }

    /// Refits θ by maximum likelihood on the completion, with counts in
    /// original case units (n_x / z). The new θ becomes current.
    pub fn m_step(&mut self, structure: &Network) -> (Network, RowCounts) {
        let z = self.z as f64;
        let (theta, rows) = ml_estimate(
            structure,
            self.tracker
                .counts
                .iter()
                .map(|(x, &n)| (x.as_slice(), n as f64 / z)),
        );
        self.tracker.set_theta(&theta);
        (theta, rows)
    }
}

/// Each case of integer weight w becomes w·z unit replicas, in case order.
pub fn replicate(data: &Dataset, z: usize) -> Result<Vec<CoarseCase>> {
    let weights = data.integer_weights()?;
    let mut out = Vec::new();
    for ((u, _), w) in data.cases().iter().zip(weights) {
        for _ in 0..w as usize * z {
            out.push(u.clone());
        }
    }
    Ok(out)
}

fn uniform_fill<R: Rng + ?Sized>(net: &Network, u: &CoarseCase, rng: &mut R) -> FullAssignment {
    u.iter()
        .enumerate()
        .map(|(i, e)| e.unwrap_or_else(|| rng.gen_range(0..net.node(i).card())))
        .collect()
}

enum Sampler {
    Table(Vec<FullAssignment>, Vec<f64>),
    Sequential,
    Impossible,
}

fn posterior_fill<R: Rng + ?Sized>(net: &Network, u: &CoarseCase, rng: &mut R) -> Option<FullAssignment> {
    let mut ev: Vec<Option<usize>> = u.0.clone();
    for v in u.missing_positions() {
        let weights: Vec<f64> = (0..net.node(v).card())
            .map(|s| {
                ev[v] = Some(s);
                inference::evidence_probability(net, &ev).unwrap_or(0.0)
            })
            .collect();
        if !weights.iter().any(|&w| w > 0.0) {
            return None;
        }
        ev[v] = Some(sample_index(&weights, rng));
    }
    Some(ev.into_iter().map(|e| e.expect("filled")).collect())
}

/// Starting 1-completion of the replicas under θ_0. Returns the assignments
/// and the number of replicas that fell back to a uniform draw because their
/// case has probability zero under θ_0.
pub fn initial_completion<R: Rng + ?Sized>(
    theta0: &Network,
    replicas: &[CoarseCase],
    policy: InitPolicy,
    rng: &mut R,
) -> Result<(Vec<FullAssignment>, usize)> {
    let mut samplers: HashMap<&CoarseCase, Sampler> = HashMap::new();
    let mut out = Vec::with_capacity(replicas.len());
    let mut fallbacks = 0;
    for u in replicas {
        if u.is_complete() {
            out.push(u.iter().map(|e| e.expect("complete")).collect());
            continue;
        }
        if policy == InitPolicy::UniformDraw {
            out.push(uniform_fill(theta0, u, rng));
            continue;
        }
        if !samplers.contains_key(u) {
            let s = if inference::completion_count(theta0, u) <= ENUMERATE_LIMIT {
                let (pe, post) = inference::enumerate_posterior(theta0, u)?;
                if pe > 0.0 {
                    let (xs, ps) = post.into_iter().unzip();
                    Sampler::Table(xs, ps)
                } else {
                    Sampler::Impossible
                }
            } else if inference::evidence_probability(theta0, u)? > 0.0 {
                Sampler::Sequential
            } else {
                Sampler::Impossible
            };
            samplers.insert(u, s);
        }
        let drawn = match &samplers[u] {
            Sampler::Table(xs, ps) => Some(xs[sample_index(ps, rng)].clone()),
            Sampler::Sequential => posterior_fill(theta0, u, rng),
            Sampler::Impossible => None,
        };
        match drawn {
            Some(x) => out.push(x),
            None => {
                fallbacks += 1;
                out.push(uniform_fill(theta0, u, rng));
            }
        }
    }
    Ok((out, fallbacks))
}

#[derive(Clone, Debug)]
pub struct AimResult {
    /// Final parameters before smoothing.
    pub raw: Network,
    pub smoothed: Network,
    /// Fractional cases behind each CPT row, in original case units.
    pub row_counts: RowCounts,
    pub trace: Vec<AimIteration>,
    /// KL(P_c ‖ P_θ) between the final completion and the returned raw θ.
    pub score: f64,
    /// KL(P_{c_{-1}} ‖ P_{θ_0}) for the initial completion.
    pub initial_score: f64,
    pub converged: bool,
    pub init_fallbacks: usize,
    /// Final completion as replica counts per state.
    pub state_counts: BTreeMap<FullAssignment, u64>,
}

pub fn aim_fit(structure: &Network, theta0: &Network, data: &Dataset, opts: &AimOptions) -> Result<AimResult> {
    opts.check()?;
    if !theta0.same_structure(structure) {
        return Err(Error::StructureMismatch(
            "initial parameters do not match the structure".into(),
        ));
    }
    let diags = theta0.validate();
    if !diags.is_empty() {
        return Err(Error::InvalidNetwork(diags));
    }
    data.check_binds(structure)?;
    let replicas = replicate(data, opts.z)?;
    let entropy = empirical_pattern_distribution(data).entropy;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (assignment, init_fallbacks) = initial_completion(theta0, &replicas, opts.init_policy, &mut rng)?;
    let mut state = AimState::new(theta0, replicas, assignment, opts.z);

    let initial_score = state.score();
    let mut prev = initial_score;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut fitted = None;
    for t in 0..opts.max_iters {
        let mut moves = 0;
        for _ in 0..opts.sweeps_per_ai_step {
            moves += state.ai_sweep();
        }
        let after_ai = state.score();
        let (theta, rows) = state.m_step(structure);
        let after_m = state.score();
        trace.push(AimIteration {
            iteration: t,
            score_after_ai: after_ai,
            score_after_m: after_m,
            sat_lower_bound: -entropy - after_ai,
            moves,
        });
        fitted = Some((theta, rows));
        if prev - after_m < opts.tol {
            converged = true;
            break;
        }
        prev = after_m;
    }
    let (raw, row_counts) = match fitted {
        Some(f) => f,
        None => {
            // max_iters = 0: refit on the initial completion only
            state.m_step(structure)
        }
    };
    let smoothed = smooth(&raw, &row_counts);
    Ok(AimResult {
        score: state.score(),
        raw,
        smoothed,
        row_counts,
        trace,
        initial_score,
        converged,
        init_fallbacks,
        state_counts: state.tracker.counts.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::learn;

    fn basic_integer(n: f64) -> Dataset {
        let net = fixtures::basic();
        Dataset::new(
            &net,
            vec![
                (CoarseCase(vec![Some(0), None]), 0.45 * n),
                (CoarseCase(vec![Some(0), Some(0)]), 0.05 * n),
                (CoarseCase(vec![Some(1), Some(0)]), 0.1 * n),
                (CoarseCase(vec![Some(1), Some(1)]), 0.4 * n),
            ],
        )
        .unwrap()
    }

    #[test]
    fn delta_matches_full_recompute() {
        let net = fixtures::basic();
        let xs: Vec<FullAssignment> = std::iter::repeat_n(vec![0, 1], 45)
            .chain(std::iter::repeat_n(vec![0, 0], 5))
            .chain(std::iter::repeat_n(vec![1, 0], 10))
            .chain(std::iter::repeat_n(vec![1, 1], 40))
            .collect();
        let mut t = KlTracker::new(&net, &xs);
        assert_eq!(t.delta(&vec![0, 1], &vec![0, 1]).unwrap(), 0.0);
        let before = t.full_kl();
        let d = t.apply_move(&vec![0, 1], &vec![0, 0]).unwrap();
        assert!((t.full_kl() - (before + d)).abs() < 1e-12);
        assert!(t.delta(&vec![9, 9], &vec![0, 0]).is_err());
    }

    #[test]
    fn move_into_impossible_state_is_heavily_penalized() {
        let net = fixtures::basic_with(1.0, 0.5);
        let xs = vec![vec![0, 0], vec![0, 1]];
        let mut t = KlTracker::new(&net, &xs);
        let d = t.delta(&vec![0, 0], &vec![1, 0]).unwrap();
        assert!(d > 100.0 && d.is_finite());
    }

    #[test]
    fn one_missing_binary_has_one_neighbour_and_sweep_is_monotone() {
        let net = fixtures::basic();
        let data = basic_integer(20.0);
        let replicas = replicate(&data, 10).unwrap();
        assert_eq!(replicas.len(), 200);
        // every U_1 replica starts at (t,f); optimal is 1/9 of them at (t,t)
        let assignment: Vec<FullAssignment> = replicas
            .iter()
            .map(|u| u.iter().map(|e| e.unwrap_or(1)).collect())
            .collect();
        let mut st = AimState::new(&net, replicas, assignment, 10);
        let before = st.score();
        let moves = st.ai_sweep();
        let after = st.score();
        assert!(after <= before);
        assert_eq!(moves, 10);
        assert!(after.abs() < 1e-12, "{after}");
        assert!((st.tracker().kl() - after).abs() < 1e-12);
    }

    #[test]
    fn complete_data_converges_at_once_to_ml() {
        let net = fixtures::asia();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = net.sample(200, &mut rng);
        let data = Dataset::from_complete(&net, &xs).unwrap();
        let r = aim_fit(&net, &net.uniform(), &data, &AimOptions::default()).unwrap();
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.trace[1].moves, 0);
        let (ml, _) = learn::ml_estimate(&net, xs.iter().map(|x| (x.as_slice(), 1.0)));
        assert!(r.raw.max_param_diff(&ml) < 1e-12);
    }

    #[test]
    fn m_step_on_optimal_counts_gives_truth() {
        let net = fixtures::basic();
        let xs: Vec<FullAssignment> = std::iter::repeat_n(vec![0, 0], 1)
            .chain(std::iter::repeat_n(vec![0, 1], 4))
            .chain(std::iter::repeat_n(vec![1, 0], 1))
            .chain(std::iter::repeat_n(vec![1, 1], 4))
            .collect();
        let replicas = xs.iter().map(|x| CoarseCase::complete(x)).collect();
        let mut st = AimState::new(&net.uniform(), replicas, xs, 1);
        let before = st.score();
        let (theta, _) = st.m_step(&net);
        assert!(theta.max_param_diff(&net) < 1e-15);
        assert!(st.score() <= before + 1e-12);
    }

    #[test]
    fn posterior_initialization_fraction() {
        let net = fixtures::basic();
        let replicas = vec![CoarseCase(vec![Some(0), None]); 40_000];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (xs, fb) = initial_completion(&net, &replicas, InitPolicy::PosteriorDraw, &mut rng).unwrap();
        assert_eq!(fb, 0);
        let tt = xs.iter().filter(|x| x[1] == 0).count() as f64 / xs.len() as f64;
        assert!((tt - 0.2).abs() < 0.01, "{tt}");
        let mut rng2 = ChaCha8Rng::seed_from_u64(1);
        let (ys, _) = initial_completion(&net, &replicas, InitPolicy::PosteriorDraw, &mut rng2).unwrap();
        assert_eq!(xs, ys);
    }

    #[test]
    fn zero_evidence_falls_back_to_uniform() {
        let net = fixtures::basic_with(1.0, 0.5);
        let replicas = vec![CoarseCase(vec![Some(1), None]); 10];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (_, fb) = initial_completion(&net, &replicas, InitPolicy::PosteriorDraw, &mut rng).unwrap();
        assert_eq!(fb, 10);
    }

    #[test]
    fn basic_recovers_truth_from_em_start() {
        let net = fixtures::basic();
        let data = basic_integer(2000.0);
        let theta1 = fixtures::basic_with(0.5, 0.15 / 0.55);
        let opts = AimOptions {
            z: 10,
            ..AimOptions::default()
        };
        let r = aim_fit(&net, &theta1, &data, &opts).unwrap();
        assert!((r.raw.cpt(1)[0] - 0.2).abs() < 0.01, "{:?}", r.raw.cpt(1));
        assert!(r.score < 1e-3, "{}", r.score);
        for w in r.trace.windows(2) {
            assert!(w[1].score_after_m <= w[0].score_after_m + 1e-9);
        }
    }

    #[test]
    fn fractional_weights_are_rejected() {
        let data = fixtures::basic_ex21_data();
        let net = fixtures::basic();
        assert!(matches!(
            aim_fit(&net, &net, &data, &AimOptions::default()),
            Err(Error::FractionalWeights { .. })
        ));
    }
}
