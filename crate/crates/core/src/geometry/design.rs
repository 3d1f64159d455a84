//! D-optimal design by Frank-Wolfe with away steps (Khachiyan's algorithm
//! with the Todd-Yildirim drop step).
//!
//! Given vectors `q_1..q_N` spanning `R^D`, finds weights `u` on the simplex
//! maximising `log det(sum u_i q_i q_i^T)`. The optimal `X = sum u_i q_i q_i^T`
//! gives the minimum-volume origin-centred ellipsoid `{x : x^T X^-1 x <= D}`
//! containing every `q_i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::dot;
use crate::numlin::{psd_pinv, SymMatrix, DEFAULT_PINV_TOL};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 1_000_000;
const REFRESH_EVERY: usize = 500;

#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub weights: Vec<f64>,
    /// `X = sum u_i q_i q_i^T`
    pub moment: SymMatrix,
    pub iterations: usize,
    /// `max_i q_i^T X^-1 q_i / D - 1`
    pub gap: f64,
}

struct State<'a> {
    points: &'a [Vec<f64>],
    u: Vec<f64>,
    x_inv: SymMatrix,
    m: Vec<f64>,
}

impl<'a> State<'a> {
    fn refresh(&mut self) -> Result<()> {
        let d = self.points[0].len();
        let mut x = SymMatrix::zeros(d);
        for (ui, q) in self.u.iter().zip(self.points) {
            if *ui > 0.0 {
                x.add_outer(*ui, q);
            }
        }
        self.x_inv = psd_pinv(&x, DEFAULT_PINV_TOL)?;
        for (mi, q) in self.m.iter_mut().zip(self.points) {
            *mi = dot(q, &self.x_inv.mul_vec(q));
        }
        Ok(())
    }

    /// `u <- (1 - tau) u + tau e_j`, with rank-one updates of `X^-1` and `M`.
    fn step(&mut self, j: usize, tau: f64) {
        let q = &self.points[j];
        let g = self.x_inv.mul_vec(q);
        let mj = self.m[j];
        let beta = tau / (1.0 - tau);
        let denom = 1.0 + beta * mj;
        let inv_keep = 1.0 / (1.0 - tau);

        for (k, (mk, qk)) in self.m.iter_mut().zip(self.points).enumerate() {
            let c = if k == j { mj } else { dot(qk, &g) };
            *mk = (*mk - beta * c * c / denom) * inv_keep;
        }
        let mut x_inv = self.x_inv.clone();
        x_inv.add_outer(-beta / denom, &g);
        self.x_inv = x_inv.scaled(inv_keep);

        for ui in self.u.iter_mut() {
            *ui *= 1.0 - tau;
        }
        self.u[j] += tau;
        if self.u[j] < 1e-300 {
            self.u[j] = 0.0;
        }
    }
}

pub(crate) fn solve(points: &[Vec<f64>], eps: f64) -> Result<Design> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let dim = points[0].len() as f64;
    let mut st = State {
        points,
        u: vec![1.0 / n as f64; n],
        x_inv: SymMatrix::zeros(points[0].len()),
        m: vec![0.0; n],
    };
    st.refresh()?;

    let mut gap = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        if it > 0 && it % REFRESH_EVERY == 0 {
            st.refresh()?;
        }
        let (up, m_max) = argmax(&st.m, |_| true);
        let (down, m_min) = argmax(&st.m.iter().map(|v| -v).collect::<Vec<_>>(), |k| st.u[k] > 0.0);
        let m_min = -m_min;
        let eps_plus = m_max / dim - 1.0;
        let eps_minus = 1.0 - m_min / dim;
        gap = eps_plus;
        if eps_plus <= eps && eps_minus <= eps {
            st.refresh()?;
            let (_, m_max) = argmax(&st.m, |_| true);
            gap = m_max / dim - 1.0;
            if gap <= eps {
                return Ok(finish(st, it, gap));
            }
            continue;
        }

        if eps_plus >= eps_minus {
            // toward step
            let tau = (m_max - dim) / (dim * (m_max - 1.0));
            st.step(up, tau);
        } else {
            // away step, capped so the weight stays nonnegative
            let uk = st.u[down];
            let limit = -uk / (1.0 - uk);
            let tau = if m_min > 1.0 {
                ((m_min - dim) / (dim * (m_min - 1.0))).max(limit)
            } else {
                limit
            };
            if tau <= limit {
                st.step(down, limit);
                st.u[down] = 0.0;
            } else {
                st.step(down, tau);
            }
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, gap })
}

fn finish(st: State<'_>, iterations: usize, gap: f64) -> Design {
    let d = st.points[0].len();
    let total: f64 = st.u.iter().sum();
    let weights: Vec<f64> = st.u.iter().map(|v| v / total).collect();
    let mut moment = SymMatrix::zeros(d);
    for (ui, q) in weights.iter().zip(st.points) {
        if *ui > 0.0 {
            moment.add_outer(*ui, q);
        }
    }
    Design { weights, moment, iterations, gap }
}

fn argmax(v: &[f64], keep: impl Fn(usize) -> bool) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in v.iter().enumerate() {
        if keep(i) && *x > best.1 {
            best = (i, *x);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_polytope_is_optimal_at_start() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let d = solve(&pts, 1e-10).unwrap();
        assert_eq!(d.iterations, 0);
        for w in &d.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn interior_point_gets_dropped() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.1, 0.1]];
        let d = solve(&pts, 1e-10).unwrap();
        assert_eq!(d.weights[2], 0.0);
        assert!((d.weights[0] - 0.5).abs() < 1e-9);
    }
}
