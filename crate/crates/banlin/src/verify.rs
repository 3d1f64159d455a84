//! Randomized self-checks of the core invariants, run by `banlin verify`.

use banlin_core::ball::{self, BallRegularizer};
use banlin_core::env::{adversary_next, run_trajectory, ActionSet, Adversary, Environment};
use banlin_core::exp2::{cross_polytope, hypercube_corners, Exp2State};
use banlin_core::geometry::{john_weights, preprocess, verify_john, DEFAULT_JOHN_TOL};
use banlin_core::hypercube::{self, bregman_quadratic_bound, Entropic};
use banlin_core::math::{dot, logsumexp};
use banlin_core::osmd::Regularizer;
use banlin_core::prelude::{HypercubePolicy, Tuning};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value against its limit.
    pub worst: f64,
    pub limit: f64,
    pub cases: usize,
}

impl Check {
    fn new(name: &'static str, limit: f64) -> Self {
        Self { name, passed: true, worst: 0.0, limit, cases: 0 }
    }

    fn observe(&mut self, value: f64) {
        self.cases += 1;
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
        if !(value <= self.limit) {
            self.passed = false;
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(lo..hi)).collect()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn john_identity(rng: &mut ChaCha8Rng, sets: usize) -> Vec<Check> {
    let mut residual = Check::new("john residual", DEFAULT_JOHN_TOL);
    let mut support = Check::new("john support size over d(d+1)/2 + 1", 1.0);
    while residual.cases < sets {
        let d = rng.gen_range(1..=6);
        let n = rng.gen_range(d + 1..=40);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| uniform(rng, d, -1.0, 1.0)).collect();
        let Ok(pre) = preprocess(&pts) else { continue };
        if pre.rank < d {
            continue;
        }
        match john_weights(&pre, f64::INFINITY) {
            Ok(j) => {
                residual.observe(verify_john(&j));
                support.observe(j.weights.len() as f64 / (d * (d + 1) / 2 + 1) as f64);
            }
            Err(_) => residual.observe(f64::INFINITY),
        }
    }
    vec![residual, support]
}

fn bregman(rng: &mut ChaCha8Rng, pairs: usize) -> Vec<Check> {
    let mut cube = Check::new("hypercube bregman bound excess", 1e-9);
    let reg = Entropic::new(4);
    while cube.cases < pairs {
        let v = uniform(rng, 4, -5.0, 5.0);
        let u: Vec<f64> = v.iter().map(|x| x + rng.gen_range(-0.5..=0.5)).collect();
        cube.observe(reg.bregman_conjugate(&u, &v) - bregman_quadratic_bound(&u, &v));
    }
    let mut ball = Check::new("ball theta bound excess", 1e-9);
    while ball.cases < pairs {
        let u = uniform(rng, 4, -5.0, 5.0);
        let v = uniform(rng, 4, -5.0, 5.0);
        if (norm(&u) - norm(&v)) / (1.0 + norm(&v)) < -0.5 {
            continue;
        }
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        ball.observe(ball::theta(&u, &v) - dot(&diff, &diff));
    }
    vec![cube, ball]
}

/// Every outcome of the hypercube perturbation with its probability.
fn cube_outcomes(a: &[f64], gamma: f64) -> Vec<(f64, Vec<f64>)> {
    let d = a.len();
    let mut out = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            out.push((gamma / (2 * d) as f64, e));
        }
    }
    for corner in hypercube_corners(d) {
        let p: f64 = corner.iter().zip(a).map(|(c, x)| 0.5 * (1.0 + c * x)).product();
        out.push(((1.0 - gamma) * p, corner));
    }
    out
}

fn ball_outcomes(a: &[f64]) -> Vec<(f64, ball::Perturbation)> {
    let d = a.len();
    let r = norm(a);
    let mut out = Vec::new();
    if r > 0.0 {
        out.push((r, ball::Perturbation { played: a.iter().map(|x| x / r).collect(), xi: true, basis: None }));
    }
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            out.push(((1.0 - r) / (2 * d) as f64, ball::Perturbation { played: e, xi: false, basis: Some((i, s)) }));
        }
    }
    out
}

fn estimators(rng: &mut ChaCha8Rng, configs: usize) -> Vec<Check> {
    let mut cov = Check::new("hypercube covariance closed form", 1e-12);
    let mut cube = Check::new("hypercube estimator bias", 1e-9);
    let mut cube_mean = Check::new("hypercube perturbation mean over gamma", 1.0 + 1e-12);
    let mut ballc = Check::new("ball estimator bias", 1e-9);
    let mut ball_mean = Check::new("ball perturbation mean", 1e-12);
    let mut ball_moment = Check::new("ball second moment identity", 1e-9);
    let mut exp2 = Check::new("exp2 estimator bias", 1e-9);
    for _ in 0..configs {
        let d = rng.gen_range(1..=6);
        let a = uniform(rng, d, -0.99, 0.99);
        let gamma = rng.gen_range(0.01..0.99);
        let zr = uniform(rng, d, -1.0, 1.0);
        let z: Vec<f64> = zr.iter().map(|v| v / zr.iter().map(|x| x.abs()).sum::<f64>()).collect();
        let outs = cube_outcomes(&a, gamma);
        let closed = hypercube::covariance(&a, gamma);
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let e: f64 = outs.iter().map(|(p, x)| p * x[i] * x[j]).sum();
                worst = worst.max((e - closed.get(i, j)).abs());
            }
        }
        cov.observe(worst);
        let mut mean_est = vec![0.0; d];
        let mut mean_play = vec![0.0; d];
        for (p, x) in &outs {
            let e = hypercube::estimate(&a, x, dot(x, &z), gamma);
            for k in 0..d {
                mean_est[k] += p * e.0[k];
                mean_play[k] += p * x[k];
            }
        }
        cube.observe(max_abs_diff(&mean_est, &z));
        cube_mean.observe(max_abs_diff(&mean_play, &a) / gamma);

        let g = uniform(rng, d, -1.0, 1.0);
        let r = rng.gen_range(0.0..0.95);
        let b: Vec<f64> = g.iter().map(|v| v * r / norm(&g).max(1e-300)).collect();
        let zb: Vec<f64> = g.iter().map(|v| v / norm(&g).max(1e-300)).collect();
        let outs = ball_outcomes(&b);
        let mut mean_est = vec![0.0; d];
        let mut mean_play = vec![0.0; d];
        let mut moment = 0.0;
        for (p, pert) in &outs {
            let e = ball::estimate(&b, pert, dot(&pert.played, &zb)).expect("margin is positive");
            for k in 0..d {
                mean_est[k] += p * e.0[k];
                mean_play[k] += p * pert.played[k];
            }
            moment += p * (1.0 - norm(&b)) * dot(&e.0, &e.0);
        }
        ballc.observe(max_abs_diff(&mean_est, &zb));
        ball_mean.observe(max_abs_diff(&mean_play, &b));
        ball_moment.observe((moment - d as f64 * dot(&zb, &zb)).abs());

        let n = rng.gen_range(d + 1..=12);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| uniform(rng, d, -1.0, 1.0)).collect();
        let Ok(mut s) = Exp2State::john(&pts, Tuning { eta: 0.1, gamma, clamped: false }) else { continue };
        let logits = uniform(rng, n, -2.0, 2.0);
        let lz = logsumexp(&logits);
        s.log_weights = logits.iter().map(|l| l - lz).collect();
        let p = s.probabilities();
        let scale = pts.iter().map(|x| dot(x, &zr).abs()).fold(0.0, f64::max);
        let zf: Vec<f64> = zr.iter().map(|v| v / scale).collect();
        let mut mean = vec![0.0; s.dim()];
        for (i, pt) in pts.iter().enumerate() {
            let e = s.estimate(i, dot(pt, &zf)).expect("covariance is invertible");
            for k in 0..s.dim() {
                mean[k] += p[i] * e.0[k];
            }
        }
        exp2.observe(max_abs_diff(&mean, &s.actions.induced_loss(&zf)));
    }
    vec![cov, cube, cube_mean, ballc, ball_mean, ball_moment, exp2]
}

fn gradient_maps(rng: &mut ChaCha8Rng, points: usize) -> Vec<Check> {
    let mut inverse = Check::new("dual map inverts gradient", 1e-8);
    let mut fd = Check::new("dual gradient finite-difference error", 1e-5);
    for _ in 0..points {
        let d = rng.gen_range(1..=6);
        let ent = Entropic::new(d);
        let x = uniform(rng, d, -0.999, 0.999);
        inverse.observe(max_abs_diff(&ent.grad_conjugate(&ent.grad(&x).expect("interior point")), &x));
        let ballr = BallRegularizer::new(d, 0.1);
        let g = uniform(rng, d, -1.0, 1.0);
        let y: Vec<f64> = g.iter().map(|v| v * rng.gen_range(0.0..0.999) / norm(&g).max(1e-300)).collect();
        inverse.observe(max_abs_diff(&ballr.grad_conjugate(&ballr.grad(&y).expect("interior point")), &y));
        let u = uniform(rng, d, -3.0, 3.0);
        let regs: [&dyn Regularizer; 2] = [&ent, &ballr];
        for reg in regs {
            let grad = reg.grad_conjugate(&u);
            let h = 1e-5;
            for i in 0..d {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += h;
                dn[i] -= h;
                let est = (reg.conjugate(&up) - reg.conjugate(&dn)) / (2.0 * h);
                fd.observe((est - grad[i]).abs() / grad[i].abs().max(1e-2));
            }
        }
    }
    vec![inverse, fd]
}

fn dual_sets(rng: &mut ChaCha8Rng, rounds: usize) -> Vec<Check> {
    let mut check = Check::new("adversary loss in dual set", 1.0 + 1e-9);
    let d = 5;
    let l1 = [Adversary::IidL1Vertex, Adversary::AdaptiveWorst, Adversary::Fixed(vec![0.2, -0.2, 0.2, -0.2, 0.2])];
    let l2 = [Adversary::Rotating { period: 97 }, Adversary::IidSphere];
    let mut cases: Vec<(ActionSet, &Adversary)> = Vec::new();
    for set in [ActionSet::Hypercube(d), ActionSet::Ball(d), ActionSet::Finite(cross_polytope(d))] {
        for adv in &l1 {
            cases.push((set.clone(), adv));
        }
    }
    for adv in &l2 {
        cases.push((ActionSet::Ball(d), adv));
    }
    for (set, adv) in &cases {
        let mut prev: Option<Vec<f64>> = None;
        for t in 1..=rounds {
            let z = adversary_next(adv, t, prev.as_deref(), d, rng).expect("generators are total");
            check.observe(set.dual_norm(&z));
            prev = Some(uniform(rng, d, -1.0, 1.0));
        }
    }
    vec![check]
}

fn determinism() -> Check {
    let mut check = Check::new("replayed trajectory differences", 0.0);
    let env = Environment::new(ActionSet::Hypercube(3), Adversary::IidL1Vertex);
    let tuning = hypercube::params(500, 3, false).expect("valid horizon");
    let run = || {
        let mut p = HypercubePolicy::new(3, tuning).expect("valid tuning");
        run_trajectory(&mut p, &env, 500, 11, 2).expect("feasible run")
    };
    let (a, b) = (run(), run());
    check.observe(a.records.iter().zip(&b.records).filter(|(x, y)| x != y).count() as f64);
    check
}

/// All suites; `scale` multiplies the number of random cases.
pub fn run_all(seed: u64, scale: f64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = |n: usize| ((n as f64 * scale).ceil() as usize).max(1);
    let mut out = Vec::new();
    out.extend(john_identity(&mut rng, k(100)));
    out.extend(bregman(&mut rng, k(10_000)));
    out.extend(estimators(&mut rng, k(100)));
    out.extend(gradient_maps(&mut rng, k(1000)));
    out.extend(dual_sets(&mut rng, k(10_000)));
    out.push(determinism());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        for c in run_all(1, 0.05) {
            assert!(c.passed, "{c:?}");
            assert!(c.cases > 0);
        }
    }

    #[test]
    fn failing_values_are_caught() {
        let mut c = Check::new("x", 1.0);
        c.observe(0.5);
        assert!(c.passed);
        c.observe(f64::NAN);
        assert!(!c.passed);
        assert!(c.worst.is_nan());
    }
}
