//! `banlin john`: John's position and exploration weights of a point set.

use anyhow::Context;
use banlin_core::geometry::{john_weights, mvee, preprocess, verify_john, DEFAULT_JOHN_TOL, DEFAULT_MVEE_TOL};
use banlin_core::numlin::SymMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct EllipsoidSummary {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JohnSummary {
    pub points: usize,
    pub dim: usize,
    /// Dimension of the linear span; the metric and weights live there.
    pub rank: usize,
    /// Minimum-volume ellipsoid of the convex hull, when the set is full-dimensional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ellipsoid: Option<EllipsoidSummary>,
    /// `H` of the origin-centred ellipsoid `{x : x^T H^-1 x <= 1}` around `±A`.
    pub metric: Vec<Vec<f64>>,
    pub contact_indices: Vec<usize>,
    pub contact_points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub residual: f64,
    pub tol: f64,
    pub max_support: usize,
    pub pass: bool,
}

fn rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}

pub fn summarize(points: &[Vec<f64>], tol: f64) -> anyhow::Result<JohnSummary> {
    let pre = preprocess(points).context("putting the set in John's position")?;
    let john = john_weights(&pre, f64::INFINITY).context("solving for the exploration weights")?;
    let residual = verify_john(&john);
    let rank = pre.rank;
    let ellipsoid = mvee(points, DEFAULT_MVEE_TOL)
        .ok()
        .map(|e| EllipsoidSummary { center: e.center.clone(), shape: rows(&e.shape) });
    let max_support = rank * (rank + 1) / 2 + 1;
    Ok(JohnSummary {
        points: points.len(),
        dim: points[0].len(),
        rank,
        ellipsoid,
        metric: rows(&pre.metric.shape),
        contact_points: john.action_indices.iter().map(|&i| pre.original[i].clone()).collect(),
        contact_indices: john.action_indices.clone(),
        pass: residual <= tol && john.weights.len() <= max_support,
        weights: john.weights,
        residual,
        tol,
        max_support,
    })
}

pub const DEFAULT_TOL: f64 = DEFAULT_JOHN_TOL;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_uniform_weights() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let s = summarize(&pts, DEFAULT_TOL).unwrap();
        assert!(s.pass);
        assert_eq!(s.rank, 2);
        let e = s.ellipsoid.unwrap();
        assert!(e.center.iter().all(|c| c.abs() < 1e-6));
        // circumscribed circle of radius sqrt 2
        assert!((e.shape[0][0] - 2.0).abs() < 1e-6 && e.shape[0][1].abs() < 1e-6);
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_sets_report_their_span() {
        let pts = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![-1.0, -1.0, 0.0]];
        let s = summarize(&pts, DEFAULT_TOL).unwrap();
        assert_eq!(s.rank, 2);
        assert!(s.ellipsoid.is_none());
        assert!(s.pass);
    }
}
