//! Mirror descent on the hypercube `{x : |x|_inf <= 1}` against losses in the
//! L1 ball.
//!
//! The regularizer is the entropic `F(x) = ½ Σ (1+x_i)ln(1+x_i) + (1-x_i)ln(1-x_i)`,
//! whose dual gradient is the coordinatewise `tanh`. The internal point `a`
//! is perturbed to a random corner with `P(ξ_i = +1) = (1 + a_i)/2`, or, with
//! probability `γ`, to a random signed basis vector.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use rand::Rng;

use crate::env::{Feedback, LossEstimate, Policy, Selection, Tuning};
use crate::math::{atanh, dot, ln_cosh, norm_inf, sqrt, tanh, xlogx};
use crate::numlin::SymMatrix;
use crate::osmd::{OsmdState, Regularizer};
use crate::{Error, Result};

/// Internal points are kept this far inside the cube before perturbation.
pub const CLIP: f64 = 1e-12;
/// Bound on `η |z~|_inf` required by the mirror-descent analysis.
pub const RANGE_BOUND: f64 = 0.5;
pub const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entropic {
    dim: usize,
}

impl Entropic {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Regularizer for Entropic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        if norm_inf(x) > 1.0 {
            return f64::INFINITY;
        }
        0.5 * x.iter().map(|v| xlogx(1.0 + v) + xlogx(1.0 - v)).sum::<f64>()
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = norm_inf(x);
        if m >= 1.0 {
            return Err(Error::DomainEscape { excess: m - 1.0 });
        }
        Ok(x.iter().map(|v| atanh(*v)).collect())
    }

    fn conjugate(&self, u: &[f64]) -> f64 {
        u.iter().map(|v| ln_cosh(*v)).sum()
    }

    fn grad_conjugate(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|v| tanh(*v)).collect()
    }

    fn domain_excess(&self, x: &[f64]) -> f64 {
        (norm_inf(x) - 1.0).max(0.0)
    }

    /// `d ln 2`, attained at the corners.
    fn value_range(&self) -> f64 {
        self.dim as f64 * LN_2
    }

    fn bregman_conjugate(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(u, v)| ln_cosh(*u) - ln_cosh(*v) - tanh(*v) * (u - v)).sum()
    }
}

/// `Σ (1 - tanh²(v_i)) (u_i - v_i)²`, the quadratic upper bound on
/// `D_{F*}(u, v)` valid when `|u - v|_inf <= ½`.
pub fn bregman_quadratic_bound(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(u, v)| {
            let t = tanh(*v);
            (1.0 - t * t) * (u - v) * (u - v)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub played: Vec<f64>,
    pub exploration: bool,
    /// Coordinate and sign of the basis vector on the exploration branch.
    pub basis: Option<(usize, f64)>,
}

pub fn clip(a: &[f64]) -> Vec<f64> {
    a.iter().map(|v| v.clamp(-1.0 + CLIP, 1.0 - CLIP)).collect()
}

/// Draws `a~` given the internal point `a` (expected to be clipped).
pub fn perturb<R: Rng + ?Sized>(a: &[f64], gamma: f64, rng: &mut R) -> Perturbation {
    let d = a.len();
    if rng.gen::<f64>() < gamma {
        let i = rng.gen_range(0..d);
        let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let mut played = vec![0.0; d];
        played[i] = s;
        Perturbation { played, exploration: true, basis: Some((i, s)) }
    } else {
        let played = a
            .iter()
            .map(|ai| if rng.gen::<f64>() < 0.5 * (1.0 + ai) { 1.0 } else { -1.0 })
            .collect();
        Perturbation { played, exploration: false, basis: None }
    }
}

/// `E[a~ | a] = (1 - γ) a`
pub fn perturbation_mean(a: &[f64], gamma: f64) -> Vec<f64> {
    a.iter().map(|v| (1.0 - gamma) * v).collect()
}

/// `|a - E[a~ | a]|_inf = γ |a|_inf`
pub fn bias_bound(a: &[f64], gamma: f64) -> f64 {
    gamma * norm_inf(a)
}

/// `P = E[a~ a~^T] = (γ/d) I + (1-γ) a a^T + (1-γ) diag(1 - a_i²)`.
pub fn covariance(a: &[f64], gamma: f64) -> SymMatrix {
    let d = a.len();
    let diag: Vec<f64> = a.iter().map(|v| gamma / d as f64 + (1.0 - gamma) * (1.0 - v * v)).collect();
    let mut p = SymMatrix::from_diag(&diag);
    p.add_outer(1.0 - gamma, a);
    p
}

/// `P^{-1} x` by Sherman-Morrison on the diagonal-plus-rank-one form of `P`.
pub fn solve_covariance(a: &[f64], gamma: f64, x: &[f64]) -> Vec<f64> {
    let d = a.len() as f64;
    let diag: Vec<f64> = a.iter().map(|v| gamma / d + (1.0 - gamma) * (1.0 - v * v)).collect();
    let dinv_x: Vec<f64> = x.iter().zip(&diag).map(|(x, g)| x / g).collect();
    let dinv_a: Vec<f64> = a.iter().zip(&diag).map(|(a, g)| a / g).collect();
    let c = (1.0 - gamma) * dot(a, &dinv_x) / (1.0 + (1.0 - gamma) * dot(a, &dinv_a));
    dinv_x.iter().zip(&dinv_a).map(|(u, v)| u - c * v).collect()
}

/// `z~ = P^{-1} a~ a~^T z = loss · P^{-1} a~`.
pub fn estimate(a: &[f64], played: &[f64], loss: f64, gamma: f64) -> LossEstimate {
    if loss == 0.0 {
        return LossEstimate::zeros(a.len());
    }
    LossEstimate(solve_covariance(a, gamma, played).iter().map(|v| loss * v).collect())
}

/// `γ = 2d sqrt(ln 2 / 3n)`, `η = sqrt(ln 2 / 3n)`, so that `ηd/γ = ½`.
///
/// When `γ > ½` the pair is clamped to `γ = ½`, `η = 1/(4d)`, or rejected in
/// strict mode.
pub fn params(n: usize, d: usize, strict: bool) -> Result<Tuning> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive"));
    }
    let eta = sqrt(LN_2 / (3.0 * n as f64));
    let gamma = 2.0 * d as f64 * eta;
    if gamma <= 0.5 {
        return Ok(Tuning { eta, gamma, clamped: false });
    }
    if strict {
        return Err(Error::HorizonTooSmall { n, required: 16.0 / 3.0 * (d * d) as f64 * LN_2 });
    }
    Ok(Tuning { eta: 0.25 / d as f64, gamma: 0.5, clamped: true })
}

#[derive(Debug, Clone)]
pub struct HypercubePolicy {
    reg: Entropic,
    state: OsmdState,
    gamma: f64,
    enforce_range: bool,
    max_range: f64,
    range_exceedances: usize,
    pending: Option<(Vec<f64>, Vec<f64>)>,
}

impl HypercubePolicy {
    pub fn new(d: usize, tuning: Tuning) -> Result<Self> {
        if !(tuning.gamma > 0.0 && tuning.gamma < 1.0) {
            return Err(Error::InvalidParameter("gamma must lie in (0, 1)"));
        }
        let reg = Entropic::new(d);
        let state = OsmdState::new(&reg, tuning.eta)?;
        Ok(Self {
            reg,
            state,
            gamma: tuning.gamma,
            enforce_range: false,
            max_range: 0.0,
            range_exceedances: 0,
            pending: None,
        })
    }

    /// Fail with `RangeViolation` when `η |z~|_inf > ½`; otherwise such
    /// rounds are only counted.
    pub fn enforce_range(mut self, on: bool) -> Self {
        self.enforce_range = on;
        self
    }

    pub fn state(&self) -> &OsmdState {
        &self.state
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Largest `η |z~|_inf` seen so far.
    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn range_exceedances(&self) -> usize {
        self.range_exceedances
    }
}

impl Policy for HypercubePolicy {
    fn dim(&self) -> usize {
        self.reg.dim
    }

    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Selection> {
        let a = clip(&self.state.action);
        let p = perturb(&a, self.gamma, rng);
        self.pending = Some((a, p.played.clone()));
        Ok(Selection { action: p.played, exploration: p.exploration })
    }

    fn feedback(&mut self, loss: f64) -> Result<Feedback> {
        let (a, played) = self.pending.take().ok_or(Error::NoPendingAction)?;
        let est = estimate(&a, &played, loss, self.gamma);
        let range = self.state.eta * norm_inf(&est.0);
        self.max_range = self.max_range.max(range);
        if range > RANGE_BOUND + RANGE_SLACK {
            if self.enforce_range {
                return Err(Error::RangeViolation { value: range, bound: RANGE_BOUND });
            }
            self.range_exceedances += 1;
        }
        let bregman = self.state.step(&self.reg, &est.0)?;
        Ok(Feedback {
            stability: bregman / self.state.eta,
            bias: bias_bound(&a, self.gamma),
            internal: Some(a),
            estimate: est,
        })
    }

    fn certificate_base(&self) -> f64 {
        self.reg.value_range() / self.state.eta
    }
}
