//! Online stochastic mirror descent in FTRL form.
//!
//! The iterate is `a_{t+1} = ∇F*(-η Σ_{s<=t} z~_s)`. Both instances map all of
//! `R^d` into the interior of their domain, so no projection step exists.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{axpy, dot, scale, sub};
use crate::{Error, Result};

/// Slack on domain membership of `∇F*` outputs.
pub const DOMAIN_TOL: f64 = 1e-9;

/// A Legendre regularizer with closed-form conjugate.
pub trait Regularizer {
    fn dim(&self) -> usize;
    /// `F(x)`, `+∞` outside the domain.
    fn value(&self, x: &[f64]) -> f64;
    /// `∇F(x)` on the open domain.
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `F*(u)`
    fn conjugate(&self, u: &[f64]) -> f64;
    /// `∇F*(u)`
    fn grad_conjugate(&self, u: &[f64]) -> Vec<f64>;
    /// How far `x` lies outside the closed domain (0 inside).
    fn domain_excess(&self, x: &[f64]) -> f64;
    /// `sup F - F(a_1)` over the set the comparator ranges over.
    fn value_range(&self) -> f64;

    /// `argmin F`, which equals `∇F*(0)`.
    fn minimizer(&self) -> Vec<f64> {
        self.grad_conjugate(&vec![0.0; self.dim()])
    }

    /// `D_{F*}(u, v) = F*(u) - F*(v) - (u - v)^T ∇F*(v)`.
    fn bregman_conjugate(&self, u: &[f64], v: &[f64]) -> f64 {
        self.conjugate(u) - self.conjugate(v) - dot(&sub(u, v), &self.grad_conjugate(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OsmdState {
    pub cum_estimate: Vec<f64>,
    pub eta: f64,
    pub action: Vec<f64>,
    pub round: usize,
}

impl OsmdState {
    pub fn new<F: Regularizer + ?Sized>(reg: &F, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter("eta must be positive and finite"));
        }
        let d = reg.dim();
        Ok(Self { cum_estimate: vec![0.0; d], eta, action: reg.minimizer(), round: 1 })
    }

    /// The dual point `-η Σ z~_s` the current action is the image of.
    pub fn dual_point(&self) -> Vec<f64> {
        scale(&self.cum_estimate, -self.eta)
    }

    /// Adds `est` to the cumulative estimate and moves to the new action.
    ///
    /// Returns `D_{F*}(new dual point, old dual point)`.
    pub fn step<F: Regularizer + ?Sized>(&mut self, reg: &F, est: &[f64]) -> Result<f64> {
        if est.len() != self.cum_estimate.len() {
            return Err(Error::DimensionMismatch { expected: self.cum_estimate.len(), found: est.len() });
        }
        if !est.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("loss estimate is not finite"));
        }
        let old = self.dual_point();
        let mut cum = self.cum_estimate.clone();
        axpy(1.0, est, &mut cum);
        let new = scale(&cum, -self.eta);
        let action = reg.grad_conjugate(&new);
        let excess = reg.domain_excess(&action);
        if excess > DOMAIN_TOL || action.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainEscape { excess });
        }
        self.cum_estimate = cum;
        self.action = action;
        self.round += 1;
        Ok(reg.bregman_conjugate(&new, &old))
    }
}

/// One round's contribution to the mirror-descent regret bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CertificateTerm {
    /// `D_{F*}(-η z~_1^t, -η z~_1^{t-1})`
    pub bregman: f64,
    /// Bound on `|a_t - E[a~_t | a_t]|` in the primal norm.
    pub bias: f64,
    /// `|z_t|_*`
    pub dual_norm: f64,
}

/// `F_range / η + Σ D_{F*} / η + Σ bias |z_t|_*`.
pub fn regret_certificate(terms: &[CertificateTerm], f_range: f64, eta: f64) -> f64 {
    let bregman: f64 = terms.iter().map(|t| t.bregman).sum();
    let bias: f64 = terms.iter().map(|t| t.bias * t.dual_norm).sum();
    f_range / eta + bregman / eta + bias
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball::BallRegularizer;
    use crate::hypercube::Entropic;
    use crate::math::{ln_cosh, tanh};

    #[test]
    fn init_at_minimizer() {
        let h = Entropic::new(3);
        let b = BallRegularizer::new(3, 0.1);
        for reg in [&h as &dyn Regularizer, &b] {
            let s = OsmdState::new(reg, 0.5).unwrap();
            assert_eq!(s.action, vec![0.0; 3]);
            assert_eq!(s.round, 1);
            assert!(crate::math::norm_inf(&reg.grad_conjugate(&[0.0; 3])) < 1e-9);
        }
        assert!(OsmdState::new(&h, 0.0).is_err());
    }

    #[test]
    fn zero_estimate_keeps_action() {
        let reg = Entropic::new(2);
        let mut s = OsmdState::new(&reg, 0.3).unwrap();
        s.step(&reg, &[0.4, -0.2]).unwrap();
        let before = s.action.clone();
        let d = s.step(&reg, &[0.0, 0.0]).unwrap();
        assert_eq!(s.action, before);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn ball_step_example() {
        let reg = BallRegularizer::new(2, 0.1);
        let mut s = OsmdState::new(&reg, 1.0).unwrap();
        s.step(&reg, &[-3.0, -4.0]).unwrap();
        assert!((s.action[0] - 0.5).abs() < 1e-15);
        assert!((s.action[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hypercube_constant_estimate_follows_tanh() {
        let reg = Entropic::new(2);
        let eta = 0.05;
        let mut s = OsmdState::new(&reg, eta).unwrap();
        let mut prev = 0.0;
        for t in 1..=200 {
            s.step(&reg, &[1.0, 0.0]).unwrap();
            let expected = tanh(-eta * t as f64);
            assert!((s.action[0] - expected).abs() < 1e-12);
            assert!(s.action[0] < prev);
            prev = s.action[0];
        }
    }

    #[test]
    fn dual_bregman_examples() {
        let reg = Entropic::new(3);
        let u = [0.3, -1.2, 2.0];
        assert_eq!(reg.bregman_conjugate(&u, &u), 0.0);
        let expected: f64 = u.iter().map(|x| ln_cosh(*x)).sum();
        assert!((reg.bregman_conjugate(&u, &[0.0; 3]) - expected).abs() < 1e-14);
    }

    #[test]
    fn certificate_arithmetic() {
        // zero adversary: only the range and bias terms remain, and bias is
        // multiplied by |z| = 0.
        let zero = [CertificateTerm { bregman: 0.0, bias: 0.2, dual_norm: 0.0 }; 5];
        assert_eq!(regret_certificate(&zero, 2.0, 0.5), 4.0);
        let one = [CertificateTerm { bregman: 0.01, bias: 0.1, dual_norm: 0.5 }];
        assert!((regret_certificate(&one, 3.0, 0.1) - (30.0 + 0.1 + 0.05)).abs() < 1e-12);
    }

    #[test]
    fn step_reports_domain_escape() {
        struct Leaky;
        impl Regularizer for Leaky {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, _x: &[f64]) -> f64 {
                0.0
            }
            fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
                Ok(x.to_vec())
            }
            fn conjugate(&self, u: &[f64]) -> f64 {
                0.5 * u[0] * u[0]
            }
            fn grad_conjugate(&self, u: &[f64]) -> Vec<f64> {
                u.to_vec()
            }
            fn domain_excess(&self, x: &[f64]) -> f64 {
                (x[0].abs() - 1.0).max(0.0)
            }
            fn value_range(&self) -> f64 {
                1.0
            }
        }
        let mut s = OsmdState::new(&Leaky, 1.0).unwrap();
        assert!(matches!(s.step(&Leaky, &[-2.0]), Err(Error::DomainEscape { .. })));
        assert_eq!(s.round, 1);
    }
}
