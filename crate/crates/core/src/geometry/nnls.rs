//! Lawson-Hanson active-set nonnegative least squares.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, norm2};
use crate::numlin::lstsq;

/// Solves `min |A x - b|` subject to `x >= 0`, where `columns[j]` is the
/// j-th column of `A`. Returns the solution and the residual norm.
///
/// The passive set is kept linearly independent, so the solution has at
/// most `rank(A)` nonzero entries.
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let n = columns.len();
    let m = b.len();
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let scale = columns.iter().map(|c| norm2(c)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-14 * scale * (m.max(n) as f64) * norm2(b).max(1.0);

    let residual_of = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (xj, col) in x.iter().zip(columns) {
            if *xj != 0.0 {
                crate::math::axpy(-xj, col, &mut r);
            }
        }
        r
    };

    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let r = residual_of(&x);
        let w: Vec<f64> = columns.iter().map(|c| dot(c, &r)).collect();
        let pick = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(core::cmp::Ordering::Equal));
        let Some(j) = pick else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;

        // Inner loop: restore feasibility of the unconstrained passive solution.
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let cols: Vec<Vec<f64>> = idx.iter().map(|&k| columns[k].clone()).collect();
            let s_p = lstsq(&cols, b);
            // Dependent columns come back as exact zeros; drop them from the set.
            let mut s = vec![0.0; n];
            for (pos, &k) in idx.iter().enumerate() {
                s[k] = s_p[pos];
            }
            let bad: Vec<usize> = idx.iter().cloned().filter(|&k| s[k] <= 0.0).collect();
            if bad.is_empty() {
                x = s;
                break;
            }
            let mut alpha = 1.0f64;
            for &k in &bad {
                let denom = x[k] - s[k];
                if denom > 0.0 {
                    alpha = alpha.min(x[k] / denom);
                } else {
                    alpha = 0.0;
                }
            }
            for k in 0..n {
                if passive[k] {
                    x[k] += alpha * (s[k] - x[k]);
                }
            }
            let mut moved = false;
            for &k in &bad {
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                    moved = true;
                }
            }
            for k in 0..n {
                if passive[k] && x[k] <= 0.0 {
                    x[k] = 0.0;
                    passive[k] = false;
                    moved = true;
                }
            }
            if !moved || !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    let res = norm2(&residual_of(&x));
    (x, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_optimum_already_feasible() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (x, r) = nnls(&cols, &[0.3, 0.7]);
        assert!((x[0] - 0.3).abs() < 1e-14 && (x[1] - 0.7).abs() < 1e-14);
        assert!(r < 1e-14);
    }

    #[test]
    fn negative_coefficient_clamped() {
        // Unconstrained fit would want x1 < 0.
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (x, r) = nnls(&cols, &[0.5, -1.0]);
        assert_eq!(x[1], 0.0);
        assert!((x[0] - 0.5).abs() < 1e-14);
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kkt_conditions_hold_on_random_problem() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let cols: Vec<Vec<f64>> =
                (0..6).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (x, _) = nnls(&cols, &b);
            let mut r = b.clone();
            for (xj, c) in x.iter().zip(&cols) {
                crate::math::axpy(-xj, c, &mut r);
            }
            for (xj, c) in x.iter().zip(&cols) {
                let g = dot(c, &r);
                assert!(*xj >= 0.0);
                if *xj > 0.0 {
                    assert!(g.abs() < 1e-9, "gradient {g} on active coordinate");
                } else {
                    assert!(g < 1e-9, "gradient {g} would improve");
                }
            }
        }
    }
}
