//! Action sets, adversaries, best-action oracles and regret accounting.
//!
//! A round is: the policy selects a point, the adversary reveals `z_t` to the
//! environment only, the policy is told the scalar `a_t^T z_t`. Regret is
//! measured against the best fixed action for the expected cumulative loss
//! when the adversary is oblivious (pseudo-regret), and against the realized
//! cumulative loss otherwise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{abs, cos, dot, ln, norm1, norm2, sin, sqrt};
use crate::{Error, Result};

/// Slack allowed on loss-set membership and `|a^T z| <= 1`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ActionSet {
    Finite(Vec<Vec<f64>>),
    /// `{x : |x|_inf <= 1}`
    Hypercube(usize),
    /// `{x : |x|_2 <= 1}`
    Ball(usize),
}

impl ActionSet {
    pub fn dim(&self) -> usize {
        match self {
            ActionSet::Finite(pts) => pts.first().map_or(0, |p| p.len()),
            ActionSet::Hypercube(d) | ActionSet::Ball(d) => *d,
        }
    }

    /// `max_{a in A} |a^T z|`: the dual norm the loss set is measured in.
    pub fn dual_norm(&self, z: &[f64]) -> f64 {
        match self {
            ActionSet::Finite(pts) => pts.iter().map(|a| abs(dot(a, z))).fold(0.0, f64::max),
            ActionSet::Hypercube(_) => norm1(z),
            ActionSet::Ball(_) => norm2(z),
        }
    }

    pub fn contains(&self, a: &[f64], slack: f64) -> bool {
        match self {
            ActionSet::Finite(pts) => pts.iter().any(|p| crate::math::norm_inf(&crate::math::sub(p, a)) <= slack),
            ActionSet::Hypercube(_) => crate::math::norm_inf(a) <= 1.0 + slack,
            ActionSet::Ball(_) => norm2(a) <= 1.0 + slack,
        }
    }

    pub fn default_loss_set(&self) -> LossSet {
        match self {
            ActionSet::Finite(_) => LossSet::Induced,
            ActionSet::Hypercube(_) => LossSet::L1Ball,
            ActionSet::Ball(_) => LossSet::L2Ball,
        }
    }
}

/// Loss-vector constraint paired with an action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossSet {
    /// `|z|_1 <= 1`
    L1Ball,
    /// `|z|_2 <= 1`
    L2Ball,
    /// `|a^T z| <= 1` for every action `a`.
    Induced,
}

impl LossSet {
    pub fn size(&self, z: &[f64], actions: &ActionSet) -> f64 {
        match self {
            LossSet::L1Ball => norm1(z),
            LossSet::L2Ball => norm2(z),
            LossSet::Induced => actions.dual_norm(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Adversary {
    Fixed(Vec<f64>),
    /// Uniform over the `2d` vertices `±e_i` of the L1 ball.
    IidL1Vertex,
    /// Uniform on the Euclidean unit sphere.
    IidSphere,
    /// `cos(2 pi t / period) e_1 + sin(2 pi t / period) e_2`
    Rotating { period: usize },
    /// Precommitted sequence; row `t - 1` is `z_t`.
    Sequence(Vec<Vec<f64>>),
    /// Vertex of the L1 ball most aligned with the previous played action
    /// (largest `|a_{t-1}(i)|`, ties to the lowest index). `e_1` on round 1.
    AdaptiveWorst,
}

impl Adversary {
    pub fn is_oblivious(&self) -> bool {
        !matches!(self, Adversary::AdaptiveWorst)
    }

    /// `E z_t` for oblivious adversaries.
    pub fn expected(&self, t: usize, dim: usize) -> Option<Vec<f64>> {
        match self {
            Adversary::Fixed(z) => Some(z.clone()),
            Adversary::IidL1Vertex | Adversary::IidSphere => Some(vec![0.0; dim]),
            Adversary::Rotating { period } => Some(rotating(t, *period, dim)),
            Adversary::Sequence(rows) => rows.get(t - 1).cloned(),
            Adversary::AdaptiveWorst => None,
        }
    }
}

fn rotating(t: usize, period: usize, dim: usize) -> Vec<f64> {
    let angle = 2.0 * PI * (t % period.max(1)) as f64 / period.max(1) as f64;
    let mut z = vec![0.0; dim];
    z[0] = cos(angle);
    if dim > 1 {
        z[1] = sin(angle);
    }
    z
}

/// Standard normal by Box-Muller.
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    sqrt(-2.0 * ln(u1)) * cos(2.0 * PI * u2)
}

/// Next loss vector. `t` is 1-based; `previous` is the action played at `t - 1`.
pub fn adversary_next<R: Rng + ?Sized>(
    adv: &Adversary,
    t: usize,
    previous: Option<&[f64]>,
    dim: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match adv {
        Adversary::Fixed(z) => {
            if z.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: z.len() });
            }
            Ok(z.clone())
        }
        Adversary::IidL1Vertex => {
            let i = rng.gen_range(0..dim);
            let mut z = vec![0.0; dim];
            z[i] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            Ok(z)
        }
        Adversary::IidSphere => loop {
            let g: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
            let n = norm2(&g);
            if n > 1e-12 {
                break Ok(g.iter().map(|v| v / n).collect());
            }
        },
        Adversary::Rotating { period } => {
            if *period == 0 {
                return Err(Error::InvalidParameter("rotation period must be positive"));
            }
            Ok(rotating(t, *period, dim))
        }
        Adversary::Sequence(rows) => {
            let z = rows.get(t - 1).ok_or(Error::SequenceExhausted { round: t, len: rows.len() })?;
            if z.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: z.len() });
            }
            Ok(z.clone())
        }
        Adversary::AdaptiveWorst => {
            let mut z = vec![0.0; dim];
            match previous {
                None => z[0] = 1.0,
                Some(a) => {
                    let mut best = 0;
                    for i in 1..dim {
                        if abs(a[i]) > abs(a[best]) {
                            best = i;
                        }
                    }
                    z[best] = if a[best] < 0.0 { -1.0 } else { 1.0 };
                }
            }
            Ok(z)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Environment {
    pub action_set: ActionSet,
    pub loss_set: LossSet,
    pub adversary: Adversary,
}

impl Environment {
    pub fn new(action_set: ActionSet, adversary: Adversary) -> Self {
        let loss_set = action_set.default_loss_set();
        Self { action_set, loss_set, adversary }
    }

    pub fn dim(&self) -> usize {
        self.action_set.dim()
    }

    /// Rejects `z` outside the loss set or violating `|a^T z| <= 1`.
    pub fn validate(&self, z: &[f64], round: usize) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: z.len() });
        }
        let size = self.loss_set.size(z, &self.action_set);
        let dual = self.action_set.dual_norm(z);
        let worst = size.max(dual);
        if !(worst <= 1.0 + FEASIBILITY_TOL) {
            return Err(Error::InfeasibleLoss { round, value: worst });
        }
        Ok(())
    }

    /// Checks every row of a file-backed sequence up front.
    pub fn validate_sequence(&self) -> Result<()> {
        if let Adversary::Sequence(rows) = &self.adversary {
            for (i, z) in rows.iter().enumerate() {
                self.validate(z, i + 1)?;
            }
        }
        Ok(())
    }
}

/// Minimiser of `a^T cum_loss` over the action set and its value.
///
/// Ties: lowest index for finite sets; `sign(0) = +1` on the hypercube (so the
/// coordinate is `-1`); the origin on the ball when `cum_loss = 0`.
pub fn best_action(set: &ActionSet, cum_loss: &[f64]) -> (Vec<f64>, f64) {
    match set {
        ActionSet::Finite(pts) => {
            let mut best = (0, f64::INFINITY);
            for (i, a) in pts.iter().enumerate() {
                let v = dot(a, cum_loss);
                if v < best.1 {
                    best = (i, v);
                }
            }
            (pts[best.0].clone(), best.1)
        }
        ActionSet::Hypercube(_) => {
            let a: Vec<f64> = cum_loss.iter().map(|z| if *z >= 0.0 { -1.0 } else { 1.0 }).collect();
            (a, -norm1(cum_loss))
        }
        ActionSet::Ball(d) => {
            let n = norm2(cum_loss);
            if n == 0.0 {
                (vec![0.0; *d], 0.0)
            } else {
                (cum_loss.iter().map(|z| -z / n).collect(), -n)
            }
        }
    }
}

/// Learning rate and exploration rate for a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tuning {
    pub eta: f64,
    pub gamma: f64,
    /// The theorem formula was outside its validity range and was clamped.
    pub clamped: bool,
}

/// A loss-vector estimate in the policy's own coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossEstimate(pub Vec<f64>);

impl LossEstimate {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Point played, in ambient coordinates.
    pub action: Vec<f64>,
    pub exploration: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub estimate: LossEstimate,
    /// Internal (unperturbed) iterate, for mirror-descent policies.
    pub internal: Option<Vec<f64>>,
    /// Second-order term of this round's regret certificate.
    pub stability: f64,
    /// Multiplier of the dual norm of `z_t` in this round's certificate.
    pub bias: f64,
}

/// A bandit strategy: pick a point, then learn from the scalar loss alone.
pub trait Policy {
    fn dim(&self) -> usize;
    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Selection>;
    fn feedback(&mut self, loss: f64) -> Result<Feedback>;
    /// Horizon-independent part of the regret certificate.
    fn certificate_base(&self) -> f64;
}

/// One select/observe/learn cycle against a known loss vector.
pub fn play_round<P: Policy, R: Rng + ?Sized>(policy: &mut P, z: &[f64], rng: &mut R) -> Result<(Selection, Feedback)> {
    let sel = policy.select(rng)?;
    let fb = policy.feedback(dot(&sel.action, z))?;
    Ok((sel, fb))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundRecord {
    pub t: usize,
    pub played: Vec<f64>,
    pub loss: f64,
    pub estimate: Vec<f64>,
    pub internal: Option<Vec<f64>>,
    pub exploration: bool,
    pub cum_loss: f64,
    pub cum_regret: f64,
    pub certificate_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RegretKind {
    /// Against the expected loss sequence of an oblivious adversary.
    Pseudo,
    /// Against the realized loss sequence.
    Realized,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectorySummary {
    pub kind: RegretKind,
    pub cum_loss: f64,
    pub best_action: Vec<f64>,
    pub best_loss: f64,
    pub regret: f64,
    pub certificate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<RoundRecord>,
    pub summary: TrajectorySummary,
}

/// Player and adversary RNG streams for one replicate.
///
/// Both are `ChaCha8Rng::seed_from_u64(master)`; the player uses stream
/// `2 * replicate` and the adversary stream `2 * replicate + 1`, so
/// replicates are independent, and the adversary's draws do not depend on
/// the player's.
pub fn replicate_rngs(master: u64, replicate: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut player = ChaCha8Rng::seed_from_u64(master);
    player.set_stream(2 * replicate);
    let mut adversary = ChaCha8Rng::seed_from_u64(master);
    adversary.set_stream(2 * replicate + 1);
    (player, adversary)
}

/// Plays `n` rounds of `policy` against `env`.
pub fn run_trajectory<P: Policy>(
    policy: &mut P,
    env: &Environment,
    n: usize,
    master_seed: u64,
    replicate: u64,
) -> Result<Trajectory> {
    let d = env.dim();
    if policy.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: policy.dim() });
    }
    env.validate_sequence()?;
    let (mut player_rng, mut adv_rng) = replicate_rngs(master_seed, replicate);
    let oblivious = env.adversary.is_oblivious();

    let mut records = Vec::with_capacity(n);
    let mut comparator = vec![0.0; d];
    let mut cum_loss = 0.0;
    let mut certificate = policy.certificate_base();
    let mut previous: Option<Vec<f64>> = None;

    for t in 1..=n {
        let z = adversary_next(&env.adversary, t, previous.as_deref(), d, &mut adv_rng)?;
        env.validate(&z, t)?;
        let sel = policy.select(&mut player_rng)?;
        let loss = dot(&sel.action, &z);
        let fb = policy.feedback(loss)?;

        let mean_z = if oblivious { env.adversary.expected(t, d).unwrap_or_else(|| z.clone()) } else { z.clone() };
        crate::math::axpy(1.0, &mean_z, &mut comparator);
        cum_loss += loss;
        let (_, best) = best_action(&env.action_set, &comparator);
        let term = fb.stability + fb.bias * env.action_set.dual_norm(&z);
        certificate += term;

        records.push(RoundRecord {
            t,
            played: sel.action.clone(),
            loss,
            estimate: fb.estimate.0,
            internal: fb.internal,
            exploration: sel.exploration,
            cum_loss,
            cum_regret: cum_loss - best,
            certificate_term: term,
        });
        previous = Some(sel.action);
    }

    let (best_action, best_loss) = best_action(&env.action_set, &comparator);
    let summary = TrajectorySummary {
        kind: if oblivious { RegretKind::Pseudo } else { RegretKind::Realized },
        cum_loss,
        best_action,
        best_loss,
        regret: cum_loss - best_loss,
        certificate,
    };
    Ok(Trajectory { records, summary })
}

/// Closed-form regret bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "theorem", rename_all = "snake_case"))]
pub enum TheoremBound {
    /// EXP2 with John's exploration: `2 sqrt(3 n d log N)`.
    Exp2John { n: usize, d: usize, actions: usize },
    /// OSMD on the hypercube: `2 d sqrt(3 n log 2)`.
    Hypercube { n: usize, d: usize },
    /// OSMD on the ball: `3 sqrt(d n log n)`.
    Ball { n: usize, d: usize },
}

impl TheoremBound {
    pub fn value(&self) -> f64 {
        match *self {
            TheoremBound::Exp2John { n, d, actions } => {
                2.0 * sqrt(3.0 * n as f64 * d as f64 * ln(actions as f64))
            }
            TheoremBound::Hypercube { n, d } => {
                2.0 * d as f64 * sqrt(3.0 * n as f64 * core::f64::consts::LN_2)
            }
            TheoremBound::Ball { n, d } => 3.0 * sqrt(d as f64 * n as f64 * ln(n as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegretReport {
    pub kind: RegretKind,
    pub seeds: usize,
    pub cumulative_loss: Vec<f64>,
    pub best_action: Vec<Vec<f64>>,
    pub best_loss: Vec<f64>,
    pub regret: Vec<f64>,
    pub mean_regret: f64,
    pub stderr: f64,
    pub bound: f64,
    pub certificate: Vec<f64>,
    pub mean_certificate: f64,
    /// Standard error of the per-seed `regret - certificate`.
    pub certificate_gap_stderr: f64,
}

impl RegretReport {
    pub fn within_bound(&self) -> bool {
        self.mean_regret <= self.bound
    }

    /// The certificate bounds expected regret, so this allows three
    /// standard errors of the per-seed gap.
    pub fn within_certificate(&self) -> bool {
        self.mean_regret - self.mean_certificate <= 3.0 * self.certificate_gap_stderr
    }
}

/// Sample mean and `sd / sqrt(len)`; the error is 0 for a single value.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let s = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / s;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (s - 1.0);
    (mean, sqrt(var / s))
}

/// Aggregates per-seed summaries (in the order given).
pub fn regret_report(runs: &[TrajectorySummary], bound: f64) -> Result<RegretReport> {
    if runs.is_empty() {
        return Err(Error::EmptySet);
    }
    let s = runs.len() as f64;
    let regret: Vec<f64> = runs.iter().map(|r| r.regret).collect();
    let (mean, stderr) = mean_stderr(&regret);
    let certificate: Vec<f64> = runs.iter().map(|r| r.certificate).collect();
    let gap: Vec<f64> = regret.iter().zip(&certificate).map(|(r, c)| r - c).collect();
    let kind = if runs.iter().all(|r| r.kind == RegretKind::Pseudo) { RegretKind::Pseudo } else { RegretKind::Realized };
    Ok(RegretReport {
        kind,
        seeds: runs.len(),
        cumulative_loss: runs.iter().map(|r| r.cum_loss).collect(),
        best_action: runs.iter().map(|r| r.best_action.clone()).collect(),
        best_loss: runs.iter().map(|r| r.best_loss).collect(),
        mean_regret: mean,
        stderr,
        bound,
        mean_certificate: certificate.iter().sum::<f64>() / s,
        certificate_gap_stderr: mean_stderr(&gap).1,
        certificate,
        regret,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Always plays the same point; estimates nothing.
    struct Constant(Vec<f64>);

    impl Policy for Constant {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn select<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> Result<Selection> {
            Ok(Selection { action: self.0.clone(), exploration: false })
        }
        fn feedback(&mut self, _loss: f64) -> Result<Feedback> {
            Ok(Feedback { estimate: LossEstimate::zeros(self.0.len()), internal: None, stability: 0.0, bias: 0.0 })
        }
        fn certificate_base(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn fixed_adversary_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let adv = Adversary::Fixed(vec![0.25, -0.5]);
        for t in 1..5 {
            assert_eq!(adversary_next(&adv, t, None, 2, &mut rng).unwrap(), vec![0.25, -0.5]);
        }
    }

    #[test]
    fn l1_vertices_are_uniform() {
        let d = 3;
        let draws = 60_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 6];
        for t in 1..=draws {
            let z = adversary_next(&Adversary::IidL1Vertex, t, None, d, &mut rng).unwrap();
            let i = z.iter().position(|v| *v != 0.0).unwrap();
            counts[2 * i + usize::from(z[i] < 0.0)] += 1;
        }
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
        // 5 degrees of freedom, 99.9% quantile is 20.5
        assert!(chi2 < 20.5, "chi2 = {chi2}");
    }

    #[test]
    fn adaptive_worst_is_most_aligned_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prev = [0.2, -0.9, 0.5];
        let z = adversary_next(&Adversary::AdaptiveWorst, 2, Some(&prev), 3, &mut rng).unwrap();
        let best = (0..3)
            .flat_map(|i| [1.0, -1.0].map(|s| {
                let mut v = vec![0.0; 3];
                v[i] = s;
                v
            }))
            .map(|v| dot(&prev, &v))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((dot(&prev, &z) - best).abs() < 1e-15);
        assert_eq!(z, vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn sequence_exhaustion_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let adv = Adversary::Sequence(vec![vec![0.1]]);
        assert!(adversary_next(&adv, 1, None, 1, &mut rng).is_ok());
        assert_eq!(
            adversary_next(&adv, 2, None, 1, &mut rng).unwrap_err(),
            Error::SequenceExhausted { round: 2, len: 1 }
        );
    }

    #[test]
    fn best_action_examples() {
        let (a, v) = best_action(&ActionSet::Hypercube(3), &[1.0, -2.0, 0.0]);
        assert_eq!(v, -3.0);
        assert_eq!(a, vec![-1.0, 1.0, -1.0]);
        let (a, v) = best_action(&ActionSet::Ball(2), &[3.0, 4.0]);
        assert_eq!(v, -5.0);
        assert!((a[0] + 0.6).abs() < 1e-15 && (a[1] + 0.8).abs() < 1e-15);
        assert_eq!(best_action(&ActionSet::Ball(2), &[0.0, 0.0]), (vec![0.0, 0.0], 0.0));
    }

    #[test]
    fn best_action_finite_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        for _ in 0..100 {
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (_, v) = best_action(&ActionSet::Finite(pts.clone()), &z);
            let scan = pts.iter().map(|a| dot(a, &z)).fold(f64::INFINITY, f64::min);
            assert_eq!(v, scan);
        }
    }

    #[test]
    fn dual_set_holds_for_generated_losses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cube = Environment::new(ActionSet::Hypercube(4), Adversary::IidL1Vertex);
        let ball = Environment::new(ActionSet::Ball(4), Adversary::IidSphere);
        let rot = Environment::new(ActionSet::Ball(4), Adversary::Rotating { period: 37 });
        for t in 1..=100_000 {
            for env in [&cube, &ball, &rot] {
                let z = adversary_next(&env.adversary, t, None, 4, &mut rng).unwrap();
                env.validate(&z, t).unwrap();
            }
        }
    }

    #[test]
    fn infeasible_sequence_rejected_not_clipped() {
        let env = Environment::new(ActionSet::Hypercube(2), Adversary::Sequence(vec![vec![0.5, 0.5], vec![0.9, 0.2]]));
        assert!(matches!(env.validate_sequence(), Err(Error::InfeasibleLoss { round: 2, .. })));
        let mut p = Constant(vec![0.0, 0.0]);
        assert!(run_trajectory(&mut p, &env, 2, 0, 0).is_err());
    }

    #[test]
    fn empty_run_and_zero_adversary() {
        let env = Environment::new(ActionSet::Ball(2), Adversary::Fixed(vec![0.0, 0.0]));
        let mut p = Constant(vec![0.6, 0.0]);
        assert!(run_trajectory(&mut p, &env, 0, 1, 0).unwrap().records.is_empty());
        let tr = run_trajectory(&mut p, &env, 5, 1, 0).unwrap();
        assert!(tr.records.iter().all(|r| r.cum_regret == 0.0));
        let rep = regret_report(&[tr.summary], TheoremBound::Ball { n: 5, d: 2 }.value()).unwrap();
        assert_eq!(rep.mean_regret, 0.0);
        assert!(rep.bound > 0.0);
    }

    #[test]
    fn hand_trace_of_three_rounds() {
        // Constant policy at (1, -1) on the hypercube against a known sequence.
        let seq = vec![vec![0.5, 0.0], vec![0.0, -0.25], vec![-0.5, 0.5]];
        let env = Environment::new(ActionSet::Hypercube(2), Adversary::Sequence(seq));
        let mut p = Constant(vec![1.0, -1.0]);
        let tr = run_trajectory(&mut p, &env, 3, 9, 0).unwrap();
        let losses: Vec<f64> = tr.records.iter().map(|r| r.loss).collect();
        assert_eq!(losses, vec![0.5, 0.25, -1.0]);
        // cumulative z = (0, 0.25), best value -0.25
        let rep = regret_report(&[tr.summary.clone()], 1.0).unwrap();
        assert_eq!(rep.cumulative_loss, vec![-0.25]);
        assert_eq!(rep.best_loss, vec![-0.25]);
        assert_eq!(rep.mean_regret, 0.0);
        // after round 1: Z = (0.5, 0), best -0.5, cum loss 0.5 -> regret 1.0
        assert_eq!(tr.records[0].cum_regret, 1.0);
        // after round 2: Z = (0.5, -0.25), best -0.75, cum loss 0.75
        assert_eq!(tr.records[1].cum_regret, 1.5);
    }

    #[test]
    fn same_seed_same_records() {
        let env = Environment::new(ActionSet::Hypercube(3), Adversary::IidL1Vertex);
        let mut a = Constant(vec![1.0, 1.0, -1.0]);
        let mut b = Constant(vec![1.0, 1.0, -1.0]);
        let ta = run_trajectory(&mut a, &env, 50, 42, 3).unwrap();
        let tb = run_trajectory(&mut b, &env, 50, 42, 3).unwrap();
        assert_eq!(ta.records, tb.records);
        let tc = run_trajectory(&mut b, &env, 50, 42, 4).unwrap();
        assert_ne!(ta.records, tc.records);
    }

    #[test]
    fn report_statistics() {
        let mk = |r: f64| TrajectorySummary {
            kind: RegretKind::Pseudo,
            cum_loss: r,
            best_action: vec![],
            best_loss: 0.0,
            regret: r,
            certificate: 10.0,
        };
        let rep = regret_report(&[mk(1.0), mk(3.0)], 5.0).unwrap();
        assert_eq!(rep.mean_regret, 2.0);
        assert!((rep.stderr - 1.0).abs() < 1e-15);
        assert!(rep.within_bound() && rep.within_certificate());
        assert_eq!(regret_report(&[], 1.0).unwrap_err(), Error::EmptySet);
    }

    #[test]
    fn bound_formulas() {
        let b = TheoremBound::Exp2John { n: 10_000, d: 5, actions: 10 }.value();
        assert!((b - 2.0 * (3.0f64 * 1e4 * 5.0 * 10f64.ln()).sqrt()).abs() < 1e-9);
        assert!((b - 1175.2).abs() < 1.0);
        assert!((TheoremBound::Hypercube { n: 10_000, d: 5 }.value() - 1442.0).abs() < 1.0);
        assert!((TheoremBound::Ball { n: 10_000, d: 5 }.value() - 2036.0).abs() < 1.0);
    }
}
