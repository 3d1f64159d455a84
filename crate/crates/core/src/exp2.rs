//! Exponential weights over a finite action set with bandit feedback.
//!
//! Actions live in John's position (see [`crate::geometry::preprocess`]) with
//! inner product `<x, y> = x^T H y`. The sampling distribution is
//! `p = (1 - γ) q + γ μ` where `μ` is John's exploration, and the loss vector
//! is estimated by `z~ = P^{-1} (<a_t, z> a_t)` with `P = Σ_a p(a) a ⊗ a`.
//! In coordinates `P = C H` where `C = Σ p(a) a a^T`, so
//! `<a, z~> = loss · a^T C^{-1} a_t` and `z~ = loss · H^{-1} C^{-1} a_t`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::env::{
    adversary_next, replicate_rngs, Environment, Feedback, LossEstimate, Policy, RegretKind,
    RoundRecord, Selection, Trajectory, TrajectorySummary, Tuning,
};
use crate::geometry::{john_weights, preprocess, PreprocessedActions, DEFAULT_JOHN_TOL};
use crate::math::{abs, dot, exp, ln, logsumexp, sqrt};
use crate::numlin::{pinv_from, psd_sqrt_pair, sym_eig, SymMatrix, DEFAULT_PINV_TOL};
use crate::{Error, Result};

/// Bound on `η |<a, z~>|` required by the exponential-weights analysis.
pub const RANGE_BOUND: f64 = 1.0;
pub const RANGE_SLACK: f64 = 1e-9;

/// `η = sqrt(ln N / (3nd))`, `γ = ηd`.
///
/// When `γ > ½` the pair is clamped to `γ = ½`, `η = γ/d`, or rejected in
/// strict mode.
pub fn params(n: usize, d: usize, n_actions: usize, strict: bool) -> Result<Tuning> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive"));
    }
    if n_actions < 2 {
        return Err(Error::InvalidParameter("exponential weights need at least two actions"));
    }
    let log_n = ln(n_actions as f64);
    let eta = sqrt(log_n / (3.0 * n as f64 * d as f64));
    let gamma = eta * d as f64;
    if gamma <= 0.5 {
        return Ok(Tuning { eta, gamma, clamped: false });
    }
    if strict {
        return Err(Error::HorizonTooSmall { n, required: 4.0 * d as f64 * log_n / 3.0 });
    }
    Ok(Tuning { eta: 0.5 / d as f64, gamma: 0.5, clamped: true })
}

/// Inverse-CDF draw from `probs` given `u` uniform in `[0, 1)`.
fn categorical(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last = i;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// Two-stage draw from `(1 - γ) q + γ μ`: the flag is set when the
/// exploration component was used.
fn mixture_sample<R: Rng + ?Sized>(q: &[f64], mu: &[f64], gamma: f64, rng: &mut R) -> (usize, bool) {
    let explore = rng.gen::<f64>() < gamma;
    let u = rng.gen::<f64>();
    if explore {
        (categorical(mu, u), true)
    } else {
        (categorical(q, u), false)
    }
}

fn normalise(log_weights: &mut [f64]) {
    let z = logsumexp(log_weights);
    for w in log_weights.iter_mut() {
        *w -= z;
    }
}

/// `C^{-1}` for `C = Σ_i p_i a_i a_i^T`.
fn inverse_moment(points: &[Vec<f64>], p: &[f64], d: usize) -> Result<SymMatrix> {
    let mut c = SymMatrix::zeros(d);
    for (a, w) in points.iter().zip(p) {
        if *w > 0.0 {
            c.add_outer(*w, a);
        }
    }
    let eig = sym_eig(&c)?;
    if !(eig.min() > DEFAULT_PINV_TOL * eig.max()) {
        return Err(Error::SingularCovariance);
    }
    pinv_from(&eig, DEFAULT_PINV_TOL)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Exp2State {
    pub actions: PreprocessedActions,
    /// `μ` over action indices.
    pub exploration: Vec<f64>,
    /// `ln q_t`, normalised so that `logsumexp = 0`.
    pub log_weights: Vec<f64>,
    pub eta: f64,
    pub gamma: f64,
    metric_inverse: SymMatrix,
}

impl Exp2State {
    pub fn new(actions: PreprocessedActions, exploration: Vec<f64>, tuning: Tuning) -> Result<Self> {
        let n = actions.len();
        if n < 2 {
            return Err(Error::InvalidParameter("exponential weights need at least two actions"));
        }
        if exploration.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: exploration.len() });
        }
        let mass: f64 = exploration.iter().sum();
        if exploration.iter().any(|m| !(*m >= 0.0)) || abs(mass - 1.0) > 1e-9 {
            return Err(Error::InvalidParameter("exploration must be a probability distribution"));
        }
        if !(tuning.eta > 0.0 && tuning.eta.is_finite()) {
            return Err(Error::InvalidParameter("eta must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&tuning.gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0, 1]"));
        }
        let log_weights = vec![-ln(n as f64); n];
        let metric_inverse = crate::numlin::psd_pinv(&actions.metric.shape, DEFAULT_PINV_TOL)?;
        Ok(Self { actions, exploration, log_weights, eta: tuning.eta, gamma: tuning.gamma, metric_inverse })
    }

    /// Preprocesses `points` and explores with John's distribution.
    pub fn john(points: &[Vec<f64>], tuning: Tuning) -> Result<Self> {
        let actions = preprocess(points)?;
        let john = john_weights(&actions, DEFAULT_JOHN_TOL)?;
        let mu = john.action_distribution(actions.len());
        Self::new(actions, mu, tuning)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.actions.dim()
    }

    /// `q_t`
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| exp(*w)).collect()
    }

    /// `p_t = (1 - γ) q_t + γ μ`
    pub fn probabilities(&self) -> Vec<f64> {
        self.weights()
            .iter()
            .zip(&self.exploration)
            .map(|(q, m)| (1.0 - self.gamma) * q + self.gamma * m)
            .collect()
    }

    /// Action index and whether it came from the exploration component.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, bool) {
        mixture_sample(&self.weights(), &self.exploration, self.gamma, rng)
    }

    /// `C = Σ_a p(a) a a^T` in reduced coordinates.
    pub fn moment(&self) -> SymMatrix {
        let mut c = SymMatrix::zeros(self.dim());
        for (a, w) in self.actions.actions.iter().zip(self.probabilities()) {
            c.add_outer(w, a);
        }
        c
    }

    /// Matrix of the operator `P = Σ_a p(a) a ⊗ a`, i.e. `C H`.
    pub fn covariance(&self) -> SymMatrix {
        self.moment().matmul(&self.actions.metric.shape)
    }

    /// `H^{1/2} C H^{1/2}`, which is similar to `P`.
    pub fn symmetrized_covariance(&self) -> Result<SymMatrix> {
        let (root, _) = psd_sqrt_pair(&self.actions.metric.shape)?;
        Ok(self.moment().congruence(&root))
    }

    fn inverse_moment(&self) -> Result<SymMatrix> {
        inverse_moment(&self.actions.actions, &self.probabilities(), self.dim())
    }

    /// `z~ = loss · H^{-1} C^{-1} a_played`
    pub fn estimate(&self, played: usize, loss: f64) -> Result<LossEstimate> {
        let c_inv = self.inverse_moment()?;
        self.estimate_with(&c_inv, played, loss)
    }

    fn estimate_with(&self, c_inv: &SymMatrix, played: usize, loss: f64) -> Result<LossEstimate> {
        let y = c_inv.mul_vec(&self.actions.actions[played]);
        Ok(LossEstimate(self.metric_inverse.mul_vec(&y).iter().map(|v| loss * v).collect()))
    }

    /// `<a, z~>` for every action.
    pub fn scores(&self, est: &LossEstimate) -> Vec<f64> {
        (0..self.len()).map(|i| self.actions.loss(i, &est.0)).collect()
    }

    /// `ln q_{t+1}(a) = ln q_t(a) - η <a, z~> + const`.
    ///
    /// With `enforce_range`, fails when `η max_a |<a, z~>| > 1` and leaves
    /// the state untouched. Returns `η max_a |<a, z~>|`.
    pub fn update(&mut self, est: &LossEstimate, enforce_range: bool) -> Result<f64> {
        let scores = self.scores(est);
        self.apply(&scores, enforce_range)
    }

    fn apply(&mut self, scores: &[f64], enforce_range: bool) -> Result<f64> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("loss estimate is not finite"));
        }
        let range = self.eta * scores.iter().fold(0.0, |m: f64, s| m.max(abs(*s)));
        if enforce_range && range > RANGE_BOUND + RANGE_SLACK {
            return Err(Error::RangeViolation { value: range, bound: RANGE_BOUND });
        }
        for (w, s) in self.log_weights.iter_mut().zip(scores) {
            *w -= self.eta * s;
        }
        normalise(&mut self.log_weights);
        Ok(range)
    }
}

/// [`Exp2State`] driven through the [`Policy`] interface.
#[derive(Debug, Clone)]
pub struct Exp2Policy {
    state: Exp2State,
    enforce_range: bool,
    max_range: f64,
    range_exceedances: usize,
    pending: Option<Pending>,
}

#[derive(Debug, Clone)]
struct Pending {
    index: usize,
    probabilities: Vec<f64>,
    c_inv: SymMatrix,
}

impl Exp2Policy {
    pub fn new(state: Exp2State) -> Self {
        Self { state, enforce_range: false, max_range: 0.0, range_exceedances: 0, pending: None }
    }

    pub fn enforce_range(mut self, on: bool) -> Self {
        self.enforce_range = on;
        self
    }

    pub fn state(&self) -> &Exp2State {
        &self.state
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn range_exceedances(&self) -> usize {
        self.range_exceedances
    }
}

impl Policy for Exp2Policy {
    fn dim(&self) -> usize {
        self.state.actions.embed.ambient_dim()
    }

    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Selection> {
        let probabilities = self.state.probabilities();
        let c_inv = inverse_moment(&self.state.actions.actions, &probabilities, self.state.dim())?;
        let (index, exploration) = self.state.sample(rng);
        self.pending = Some(Pending { index, probabilities, c_inv });
        Ok(Selection { action: self.state.actions.original[index].clone(), exploration })
    }

    fn feedback(&mut self, loss: f64) -> Result<Feedback> {
        let pending = self.pending.take().ok_or(Error::NoPendingAction)?;
        let est = self.state.estimate_with(&pending.c_inv, pending.index, loss)?;
        let scores = self.state.scores(&est);
        let eta = self.state.eta;
        let stability = eta * pending.probabilities.iter().zip(&scores).map(|(p, s)| p * s * s).sum::<f64>();
        let range = self.state.apply(&scores, self.enforce_range)?;
        self.max_range = self.max_range.max(range);
        if range > RANGE_BOUND + RANGE_SLACK {
            self.range_exceedances += 1;
        }
        Ok(Feedback { estimate: est, internal: None, stability, bias: 2.0 * self.state.gamma })
    }

    fn certificate_base(&self) -> f64 {
        ln(self.state.len() as f64) / self.state.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpertsParams {
    pub tuning: Tuning,
    pub enforce_range: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertsOutcome {
    pub expert: usize,
    pub action: Vec<f64>,
    pub loss: f64,
    pub exploration: bool,
    /// All experts agreed, so nothing was learned this round.
    pub degenerate: bool,
    pub estimate: Option<LossEstimate>,
    /// `η Σ_k p(k) <a_k, z~>²`
    pub stability: f64,
    /// Exploration distribution over experts used this round.
    pub exploration_weights: Vec<f64>,
}

/// One round of exponential weights over experts whose suggested actions
/// change every round.
///
/// The round's distinct suggestions are put in John's position afresh. The
/// exploration mass `μ_t` of a contact point is split equally among the
/// experts suggesting it. When every expert suggests the same action the
/// round is charged but the weights are left alone.
pub fn experts_round<R: Rng + ?Sized>(
    suggestions: &[Vec<f64>],
    log_weights: &mut [f64],
    params: ExpertsParams,
    loss_of: impl FnOnce(&[f64]) -> f64,
    rng: &mut R,
) -> Result<ExpertsOutcome> {
    let k = suggestions.len();
    if k == 0 {
        return Err(Error::EmptySet);
    }
    if log_weights.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: log_weights.len() });
    }
    let Tuning { eta, gamma, .. } = params.tuning;
    let q: Vec<f64> = log_weights.iter().map(|w| exp(*w - logsumexp(log_weights))).collect();

    let mut distinct: Vec<Vec<f64>> = Vec::new();
    let mut group = Vec::with_capacity(k);
    for s in suggestions {
        match distinct.iter().position(|d| d == s) {
            Some(j) => group.push(j),
            None => {
                group.push(distinct.len());
                distinct.push(s.clone());
            }
        }
    }

    if distinct.len() == 1 {
        let mu = vec![1.0 / k as f64; k];
        let (expert, exploration) = mixture_sample(&q, &mu, gamma, rng);
        let loss = loss_of(&suggestions[expert]);
        return Ok(ExpertsOutcome {
            expert,
            action: suggestions[expert].clone(),
            loss,
            exploration,
            degenerate: true,
            estimate: None,
            stability: 0.0,
            exploration_weights: mu,
        });
    }

    let pre = preprocess(&distinct)?;
    let john = john_weights(&pre, DEFAULT_JOHN_TOL)?;
    let mu_actions = john.action_distribution(pre.len());
    let mut counts = vec![0usize; distinct.len()];
    for g in &group {
        counts[*g] += 1;
    }
    let mu: Vec<f64> = group.iter().map(|g| mu_actions[*g] / counts[*g] as f64).collect();
    let p: Vec<f64> = q.iter().zip(&mu).map(|(q, m)| (1.0 - gamma) * q + gamma * m).collect();

    let mut p_actions = vec![0.0; distinct.len()];
    for (g, pk) in group.iter().zip(&p) {
        p_actions[*g] += pk;
    }
    let c_inv = inverse_moment(&pre.actions, &p_actions, pre.dim())?;

    let (expert, exploration) = mixture_sample(&q, &mu, gamma, rng);
    let loss = loss_of(&suggestions[expert]);
    let y = c_inv.mul_vec(&pre.actions[group[expert]]);
    let action_scores: Vec<f64> = pre.actions.iter().map(|a| loss * dot(a, &y)).collect();
    let scores: Vec<f64> = group.iter().map(|g| action_scores[*g]).collect();
    let range = eta * scores.iter().fold(0.0, |m: f64, s| m.max(abs(*s)));
    if params.enforce_range && range > RANGE_BOUND + RANGE_SLACK {
        return Err(Error::RangeViolation { value: range, bound: RANGE_BOUND });
    }
    let stability = eta * p.iter().zip(&scores).map(|(p, s)| p * s * s).sum::<f64>();
    for (w, s) in log_weights.iter_mut().zip(&scores) {
        *w -= eta * s;
    }
    normalise(log_weights);

    let h_inv = crate::numlin::psd_pinv(&pre.metric.shape, DEFAULT_PINV_TOL)?;
    let estimate = LossEstimate(h_inv.mul_vec(&y).iter().map(|v| loss * v).collect());
    Ok(ExpertsOutcome {
        expert,
        action: suggestions[expert].clone(),
        loss,
        exploration,
        degenerate: false,
        estimate: Some(estimate),
        stability,
        exploration_weights: mu,
    })
}

/// Experts facing a changing context.
///
/// Each round the adversary stream draws a context of `context_size` points
/// from `base` and the loss vector. Expert `k` holds a fixed preference
/// vector `w_k` (drawn once from the adversary stream) and suggests
/// `argmin_{a in context} w_k^T a`. Regret is measured against the best
/// single expert.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpertsGame {
    pub base: Vec<Vec<f64>>,
    pub experts: usize,
    pub context_size: usize,
}

impl ExpertsGame {
    fn suggestions<R: Rng + ?Sized>(&self, prefs: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
        let m = self.base.len();
        // partial Fisher-Yates
        let mut idx: Vec<usize> = (0..m).collect();
        for i in 0..self.context_size.min(m) {
            let j = rng.gen_range(i..m);
            idx.swap(i, j);
        }
        let context = &idx[..self.context_size.min(m)];
        prefs
            .iter()
            .map(|w| {
                let mut best = context[0];
                for &c in context {
                    if dot(w, &self.base[c]) < dot(w, &self.base[best]) {
                        best = c;
                    }
                }
                self.base[best].clone()
            })
            .collect()
    }

    /// Plays `n` rounds. `env.action_set` should be `Finite(base)`.
    pub fn run(&self, env: &Environment, params: ExpertsParams, n: usize, master_seed: u64, replicate: u64) -> Result<Trajectory> {
        if self.experts == 0 || self.context_size == 0 || self.base.is_empty() {
            return Err(Error::EmptySet);
        }
        let d = env.dim();
        env.validate_sequence()?;
        let (mut player_rng, mut adv_rng) = replicate_rngs(master_seed, replicate);
        let prefs: Vec<Vec<f64>> =
            (0..self.experts).map(|_| (0..d).map(|_| crate::env::normal(&mut adv_rng)).collect()).collect();
        let oblivious = env.adversary.is_oblivious();

        let mut log_weights = vec![-ln(self.experts as f64); self.experts];
        let mut expert_totals = vec![0.0; self.experts];
        let mut cum_loss = 0.0;
        let mut certificate = ln(self.experts as f64) / params.tuning.eta;
        let mut records = Vec::with_capacity(n);
        let mut previous: Option<Vec<f64>> = None;

        for t in 1..=n {
            let z = adversary_next(&env.adversary, t, previous.as_deref(), d, &mut adv_rng)?;
            env.validate(&z, t)?;
            let suggestions = self.suggestions(&prefs, &mut adv_rng);
            let out = experts_round(&suggestions, &mut log_weights, params, |a| dot(a, &z), &mut player_rng)?;

            let mean_z = if oblivious { env.adversary.expected(t, d).unwrap_or_else(|| z.clone()) } else { z.clone() };
            for (total, s) in expert_totals.iter_mut().zip(&suggestions) {
                *total += dot(s, &mean_z);
            }
            cum_loss += out.loss;
            let best = expert_totals.iter().cloned().fold(f64::INFINITY, f64::min);
            let term = out.stability + 2.0 * params.tuning.gamma * env.action_set.dual_norm(&z);
            certificate += term;
            records.push(RoundRecord {
                t,
                played: out.action.clone(),
                loss: out.loss,
                estimate: out.estimate.map(|e| e.0).unwrap_or_default(),
                internal: None,
                exploration: out.exploration,
                cum_loss,
                cum_regret: cum_loss - best,
                certificate_term: term,
            });
            previous = Some(out.action);
        }

        let (best_k, best_loss) = expert_totals
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, v)| if *v < acc.1 { (k, *v) } else { acc });
        let summary = TrajectorySummary {
            kind: if oblivious { RegretKind::Pseudo } else { RegretKind::Realized },
            cum_loss,
            best_action: vec![best_k as f64],
            best_loss: if n == 0 { 0.0 } else { best_loss },
            regret: cum_loss - if n == 0 { 0.0 } else { best_loss },
            certificate,
        };
        Ok(Trajectory { records, summary })
    }
}

/// All `2^d` corners of the hypercube, in binary order with bit `i` set
/// meaning coordinate `i` is `+1`.
pub fn hypercube_corners(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d).map(|m| (0..d).map(|i| if m >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()).collect()
}

/// `±e_i`, in the order `e_1, -e_1, e_2, ...`.
pub fn cross_polytope(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * d);
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            out.push(e);
        }
    }
    out
}
