//! Mirror descent on the Euclidean unit ball against losses in the unit ball.
//!
//! `F(x) = -ln(1 - |x|) - |x|`, with `∇F(x) = x / (1 - |x|)` and
//! `∇F*(u) = u / (1 + |u|)`. The internal point `a` is played as `a / |a|`
//! with probability `|a|`, and as a uniformly random signed basis vector
//! otherwise.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::env::{Feedback, LossEstimate, Policy, Selection, Tuning};
use crate::math::{dot, ln, ln_1p, norm2, scale, sqrt};
use crate::osmd::{OsmdState, Regularizer};
use crate::{Error, Result};

/// Smallest `1 - |a|` the estimator accepts.
pub const BLOWUP_MARGIN: f64 = 1e-12;
pub const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallRegularizer {
    dim: usize,
    gamma: f64,
}

impl BallRegularizer {
    /// `gamma` sets the radius `1 - γ` of the comparator ball used for the
    /// range term.
    pub fn new(dim: usize, gamma: f64) -> Self {
        Self { dim, gamma }
    }
}

impl Regularizer for BallRegularizer {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = norm2(x);
        if r >= 1.0 {
            return f64::INFINITY;
        }
        -ln_1p(-r) - r
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = norm2(x);
        if r >= 1.0 {
            return Err(Error::DomainEscape { excess: r - 1.0 });
        }
        Ok(scale(x, 1.0 / (1.0 - r)))
    }

    fn conjugate(&self, u: &[f64]) -> f64 {
        let r = norm2(u);
        r - ln_1p(r)
    }

    fn grad_conjugate(&self, u: &[f64]) -> Vec<f64> {
        scale(u, 1.0 / (1.0 + norm2(u)))
    }

    fn domain_excess(&self, x: &[f64]) -> f64 {
        (norm2(x) - 1.0).max(0.0)
    }

    /// `F` on the sphere of radius `1 - γ`: `ln(1/γ) - (1 - γ)`.
    fn value_range(&self) -> f64 {
        -ln(self.gamma) - (1.0 - self.gamma)
    }

    fn bregman_conjugate(&self, u: &[f64], v: &[f64]) -> f64 {
        theta(u, v) / (1.0 + norm2(v))
    }
}

/// `Θ(u, v) = (1 + |v|) D_{F*}(u, v)`.
pub fn theta(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm2(u), norm2(v));
    nu - nv + nu * nv - dot(v, u) - (1.0 + nv) * ln_1p((nu - nv) / (1.0 + nv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub played: Vec<f64>,
    /// `ξ = 1`: the direction `a / |a|` was played.
    pub xi: bool,
    /// Coordinate and sign when `ξ = 0`.
    pub basis: Option<(usize, f64)>,
}

pub fn perturb<R: Rng + ?Sized>(a: &[f64], rng: &mut R) -> Perturbation {
    let d = a.len();
    let r = norm2(a);
    if rng.gen::<f64>() < r {
        return Perturbation { played: scale(a, 1.0 / r), xi: true, basis: None };
    }
    let i = rng.gen_range(0..d);
    let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let mut played = vec![0.0; d];
    played[i] = s;
    Perturbation { played, xi: false, basis: Some((i, s)) }
}

/// `z~ = (1 - ξ) d / (1 - |a|) · loss · a~`.
pub fn estimate(a: &[f64], p: &Perturbation, loss: f64) -> Result<LossEstimate> {
    let d = a.len();
    if p.xi {
        return Ok(LossEstimate::zeros(d));
    }
    let margin = 1.0 - norm2(a);
    if margin < BLOWUP_MARGIN {
        return Err(Error::NumericalBlowup { margin });
    }
    Ok(LossEstimate(scale(&p.played, d as f64 / margin * loss)))
}

/// `γ = 1/sqrt(n)`, `η = sqrt(ln n / (2nd))`, valid when `ηd <= ½`.
///
/// Otherwise `η` is clamped to `1/(2d)`, or rejected in strict mode.
pub fn params(n: usize, d: usize, strict: bool) -> Result<Tuning> {
    if n < 2 || d == 0 {
        return Err(Error::InvalidParameter("ball parameters need n >= 2 and d >= 1"));
    }
    let gamma = 1.0 / sqrt(n as f64);
    let eta = sqrt(ln(n as f64) / (2.0 * n as f64 * d as f64));
    if eta * d as f64 <= 0.5 {
        return Ok(Tuning { eta, gamma, clamped: false });
    }
    if strict {
        let mut m = n;
        while (m as f64) < 2.0 * d as f64 * ln(m as f64) {
            m += 1;
        }
        return Err(Error::HorizonTooSmall { n, required: m as f64 });
    }
    Ok(Tuning { eta: 0.5 / d as f64, gamma, clamped: true })
}

#[derive(Debug, Clone)]
pub struct BallPolicy {
    reg: BallRegularizer,
    state: OsmdState,
    gamma: f64,
    project: bool,
    enforce_range: bool,
    max_range: f64,
    range_exceedances: usize,
    pending: Option<(Vec<f64>, Perturbation)>,
}

impl BallPolicy {
    pub fn new(d: usize, tuning: Tuning) -> Result<Self> {
        if !(tuning.gamma > 0.0 && tuning.gamma < 1.0) {
            return Err(Error::InvalidParameter("gamma must lie in (0, 1)"));
        }
        let reg = BallRegularizer::new(d, tuning.gamma);
        let state = OsmdState::new(&reg, tuning.eta)?;
        Ok(Self { reg, state, gamma: tuning.gamma, project: false, enforce_range: false, max_range: 0.0, range_exceedances: 0, pending: None })
    }

    /// Perturb the internal point after shrinking it to norm at most
    /// `1 - γ`. The mirror-descent iterate itself is left as is.
    pub fn project(mut self, on: bool) -> Self {
        self.project = on;
        self
    }

    /// Fail with `RangeViolation` when `η |z~| (1 - |a|) > ηd`.
    pub fn enforce_range(mut self, on: bool) -> Self {
        self.enforce_range = on;
        self
    }

    pub fn state(&self) -> &OsmdState {
        &self.state
    }

    pub fn regularizer(&self) -> &BallRegularizer {
        &self.reg
    }

    /// Largest `η |z~| (1 - |a|)` seen so far; at most `ηd` in theory.
    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn range_exceedances(&self) -> usize {
        self.range_exceedances
    }

    fn internal_point(&self) -> Vec<f64> {
        let a = &self.state.action;
        let r = norm2(a);
        let cap = 1.0 - self.gamma;
        if self.project && r > cap {
            scale(a, cap / r)
        } else {
            a.clone()
        }
    }
}

impl Policy for BallPolicy {
    fn dim(&self) -> usize {
        self.reg.dim
    }

    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Selection> {
        let a = self.internal_point();
        let p = perturb(&a, rng);
        let sel = Selection { action: p.played.clone(), exploration: !p.xi };
        self.pending = Some((a, p));
        Ok(sel)
    }

    fn feedback(&mut self, loss: f64) -> Result<Feedback> {
        let (a, p) = self.pending.take().ok_or(Error::NoPendingAction)?;
        let est = estimate(&a, &p, loss)?;
        let d = self.reg.dim as f64;
        let eta = self.state.eta;
        let range = eta * norm2(&est.0) * (1.0 - norm2(&a));
        if range > eta * d + RANGE_SLACK {
            if self.enforce_range {
                return Err(Error::RangeViolation { value: range, bound: eta * d });
            }
            self.range_exceedances += 1;
        }
        self.max_range = self.max_range.max(range);
        let bregman = self.state.step(&self.reg, &est.0)?;
        Ok(Feedback { estimate: est, internal: Some(a), stability: bregman / eta, bias: self.gamma })
    }

    fn certificate_base(&self) -> f64 {
        self.reg.value_range() / self.state.eta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{play_round, regret_report, run_trajectory, ActionSet, Adversary, Environment, TheoremBound};
    use crate::math::axpy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn outcomes(a: &[f64]) -> Vec<(f64, Perturbation)> {
        let d = a.len();
        let r = norm2(a);
        let mut out = Vec::new();
        if r > 0.0 {
            out.push((r, Perturbation { played: scale(a, 1.0 / r), xi: true, basis: None }));
        }
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                out.push(((1.0 - r) / (2 * d) as f64, Perturbation { played: e, xi: false, basis: Some((i, s)) }));
            }
        }
        out
    }

    fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, max_r: f64) -> Vec<f64> {
        let g: Vec<f64> = (0..d).map(|_| crate::env::normal(rng)).collect();
        scale(&g, rng.gen_range(0.0..max_r) / norm2(&g))
    }

    #[test]
    fn closed_forms_at_origin() {
        let r = BallRegularizer::new(3, 0.1);
        assert_eq!(r.value(&[0.0; 3]), 0.0);
        assert_eq!(r.grad(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(r.conjugate(&[0.0; 3]), 0.0);
        assert_eq!(r.grad_conjugate(&[0.0; 3]), vec![0.0; 3]);
        assert!(matches!(r.grad(&[1.0, 0.0, 0.0]), Err(Error::DomainEscape { .. })));
    }

    #[test]
    fn inverse_map_example() {
        let r = BallRegularizer::new(2, 0.1);
        let g = r.grad(&[0.7, 0.0]).unwrap();
        assert!((g[0] - 0.7 / 0.3).abs() < 1e-14);
        assert!((r.grad_conjugate(&g)[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn conjugate_matches_line_search() {
        // F* is a sup over x; by symmetry the maximiser is along u.
        let r = BallRegularizer::new(3, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..50 {
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let nu = norm2(&u);
            let f = |s: f64| s * nu + (1.0 - s).ln() + s;
            let (mut lo, mut hi) = (0.0, 1.0 - 1e-15);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1) < f(m2) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            assert!((f(0.5 * (lo + hi)) - r.conjugate(&u)).abs() < 1e-6);
            assert!(norm2(&r.grad_conjugate(&u)) < 1.0);
        }
    }

    #[test]
    fn superball_identity() {
        let r = BallRegularizer::new(4, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let a = random_in_ball(&mut rng, 4, 0.999);
            let g = r.grad(&a).unwrap();
            assert!((1.0 / (1.0 + norm2(&g)) - (1.0 - norm2(&a))).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut checked = 0;
        while checked < 10_000 {
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let u: Vec<f64> = v.iter().map(|x| x + rng.gen_range(-3.0..3.0)).collect();
            if (norm2(&u) - norm2(&v)) / (1.0 + norm2(&v)) < -0.5 {
                continue;
            }
            let diff = crate::math::sub(&u, &v);
            assert!(theta(&u, &v) <= dot(&diff, &diff) + 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn perturbation_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for d in 1..=10 {
            for _ in 0..20 {
                let a = random_in_ball(&mut rng, d, 0.99);
                let mut mean = vec![0.0; d];
                for (p, o) in outcomes(&a) {
                    assert!((norm2(&o.played) - 1.0).abs() < 1e-15);
                    axpy(p, &o.played, &mut mean);
                }
                for i in 0..d {
                    assert!((mean[i] - a[i]).abs() < 1e-12);
                }
            }
        }
        // (0.3, 0.4) by hand
        let mut mean = [0.0; 2];
        for (p, o) in outcomes(&[0.3, 0.4]) {
            mean[0] += p * o.played[0];
            mean[1] += p * o.played[1];
        }
        assert!((mean[0] - 0.3).abs() < 1e-12 && (mean[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn perturbation_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..1000 {
            assert!(!perturb(&[0.0, 0.0], &mut rng).xi);
        }
        let hits = (0..10_000).filter(|_| perturb(&[0.0, 1.0 - 1e-6], &mut rng).xi).count();
        assert!(hits >= 9_990);
    }

    #[test]
    fn estimator_examples() {
        let dir = Perturbation { played: vec![0.6, 0.8], xi: true, basis: None };
        assert_eq!(estimate(&[0.3, 0.4], &dir, 0.7).unwrap(), LossEstimate::zeros(2));
        let e1 = Perturbation { played: vec![1.0, 0.0], xi: false, basis: Some((0, 1.0)) };
        let e = estimate(&[0.0, 0.0], &e1, dot(&e1.played, &[0.3, 0.4])).unwrap();
        assert!((e.0[0] - 0.6).abs() < 1e-15 && e.0[1] == 0.0);
        assert!(matches!(estimate(&[1.0, 0.0], &e1, 0.5), Err(Error::NumericalBlowup { .. })));
    }

    #[test]
    fn estimator_unbiased_with_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for d in 1..=10 {
            for _ in 0..20 {
                let a = random_in_ball(&mut rng, d, 0.99);
                let z = random_in_ball(&mut rng, d, 1.0);
                let mut mean = vec![0.0; d];
                let mut second = 0.0;
                for (p, o) in outcomes(&a) {
                    let e = estimate(&a, &o, dot(&o.played, &z)).unwrap();
                    axpy(p, &e.0, &mut mean);
                    second += p * (1.0 - norm2(&a)) * dot(&e.0, &e.0);
                }
                for i in 0..d {
                    assert!((mean[i] - z[i]).abs() < 1e-9);
                }
                assert!((second - d as f64 * dot(&z, &z)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn params_examples() {
        let t = params(10_000, 5, true).unwrap();
        assert!((t.gamma - 0.01).abs() < 1e-15);
        assert!((t.eta - 0.00960).abs() < 1e-5);
        assert!(t.eta * 5.0 <= 0.5);
        assert!(matches!(params(20, 20, true), Err(Error::HorizonTooSmall { .. })));
        assert!(params(20, 20, false).unwrap().clamped);
        assert!((params(2, 1, true).unwrap().gamma - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(params(1, 1, false).is_err());
    }

    #[test]
    fn zero_adversary_stays_at_origin() {
        let env = Environment::new(ActionSet::Ball(3), Adversary::Fixed(vec![0.0; 3]));
        let mut p = BallPolicy::new(3, params(500, 3, true).unwrap()).unwrap();
        let tr = run_trajectory(&mut p, &env, 500, 7, 0).unwrap();
        assert!(tr.records.iter().all(|r| r.internal.as_deref() == Some(&[0.0; 3][..])));
        assert!(tr.records.iter().all(|r| r.cum_regret == 0.0));
    }

    #[test]
    fn one_round_dual_map() {
        let t = params(1000, 2, true).unwrap();
        let mut p = BallPolicy::new(2, t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let (_, fb) = play_round(&mut p, &[0.6, -0.8], &mut rng).unwrap();
        let n = t.eta * norm2(&fb.estimate.0);
        assert!((norm2(&p.state().action) - n / (1.0 + n)).abs() < 1e-15);
    }

    #[test]
    fn constant_loss_pushes_toward_minus_e1() {
        let n = 5000;
        let t = params(n, 3, true).unwrap();
        let mut mean = [0.0; 3];
        let seeds = 20;
        for s in 0..seeds {
            let mut p = BallPolicy::new(3, t).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + s);
            for _ in 0..n {
                play_round(&mut p, &[1.0, 0.0, 0.0], &mut rng).unwrap();
            }
            axpy(1.0 / seeds as f64, &p.state().action, &mut mean);
        }
        assert!(mean[0] < -0.9, "{mean:?}");
        assert!(mean[1].abs() < 0.2 && mean[2].abs() < 0.2);
    }

    #[test]
    fn projection_keeps_played_internal_point_in_shrunk_ball() {
        let t = Tuning { eta: 0.1, gamma: 0.2, clamped: false };
        let mut p = BallPolicy::new(2, t).unwrap().project(true);
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..300 {
            let (_, fb) = play_round(&mut p, &[1.0, 0.0], &mut rng).unwrap();
            assert!(norm2(fb.internal.as_ref().unwrap()) <= 0.8 + 1e-12);
        }
        assert!(norm2(&p.state().action) > 0.8);
    }

    #[test]
    fn range_control_under_theorem_parameters() {
        let n = 2000;
        let d = 4;
        let t = params(n, d, true).unwrap();
        let env = Environment::new(ActionSet::Ball(d), Adversary::IidSphere);
        let mut p = BallPolicy::new(d, t).unwrap().enforce_range(true);
        let tr = run_trajectory(&mut p, &env, n, 3, 0).unwrap();
        for r in &tr.records {
            let a = r.internal.as_ref().unwrap();
            assert!(t.eta * norm2(&r.estimate) * (1.0 - norm2(a)) <= t.eta * d as f64 + 1e-9);
        }
        let rep = regret_report(&[tr.summary], TheoremBound::Ball { n, d }.value()).unwrap();
        assert!(rep.mean_regret.is_finite());
    }
}
