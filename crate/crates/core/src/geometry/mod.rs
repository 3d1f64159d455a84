//! Action-set geometry: rank reduction, minimum-volume enclosing ellipsoids,
//! the preprocessing that puts an action set in John's position, and the
//! exploration distribution supported on its contact points.
//!
//! Only finite point sets are accepted. Sets described by half-spaces have
//! no entry point here: computing their John ellipsoid is NP-hard in general.

mod design;
mod nnls;

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, ln};
use crate::numlin::{psd_sqrt_pair, sym_eig, SymMatrix};
use crate::{Error, Result};

pub use design::MAX_ITERATIONS as MVEE_MAX_ITERATIONS;
pub use nnls::nnls;

pub const DEFAULT_MVEE_TOL: f64 = 1e-8;
pub const DEFAULT_CONTACT_TOL: f64 = 1e-6;
pub const DEFAULT_JOHN_TOL: f64 = 1e-6;
/// Weights below this are pruned from the John decomposition.
pub const PRUNE_BELOW: f64 = 1e-10;

const RANK_TOL: f64 = 1e-9;

/// `{x : (x - center)^T shape^-1 (x - center) <= 1}`
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    pub shape: SymMatrix,
}

impl Ellipsoid {
    /// `(x - center)^T shape^-1 (x - center)`; at most 1 inside.
    pub fn level(&self, x: &[f64]) -> Result<f64> {
        let inv = crate::numlin::psd_pinv(&self.shape, crate::numlin::DEFAULT_PINV_TOL)?;
        let y = crate::math::sub(x, &self.center);
        Ok(dot(&y, &inv.mul_vec(&y)))
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(sym_eig(&self.shape)?.eigenvalues.iter().map(|l| ln(*l)).sum())
    }
}

/// Inner product `<x, y> = x^T H y`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metric {
    pub shape: SymMatrix,
}

impl Metric {
    pub fn euclidean(dim: usize) -> Self {
        Self { shape: SymMatrix::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.shape.mul_vec(y))
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        self.inner(x, x)
    }
}

/// Affine map `x' -> origin + B x'` from reduced to ambient coordinates.
/// `basis == None` is the identity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Embedding {
    pub origin: Vec<f64>,
    /// Orthonormal columns of `B`.
    pub basis: Option<Vec<Vec<f64>>>,
}

impl Embedding {
    pub fn identity(dim: usize) -> Self {
        Self { origin: vec![0.0; dim], basis: None }
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.basis.as_ref().map_or(self.origin.len(), |b| b.len())
    }

    pub fn lift(&self, reduced: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => self.origin.iter().zip(reduced).map(|(o, x)| o + x).collect(),
            Some(cols) => {
                let mut out = self.origin.clone();
                for (c, col) in reduced.iter().zip(cols) {
                    crate::math::axpy(*c, col, &mut out);
                }
                out
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let y = crate::math::sub(x, &self.origin);
        self.pull_back(&y)
    }

    /// `B^T z`: the linear part of the loss seen in reduced coordinates.
    pub fn pull_back(&self, z: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => z.to_vec(),
            Some(cols) => cols.iter().map(|c| dot(c, z)).collect(),
        }
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptySet)?;
    let d = first.len();
    if d == 0 {
        return Err(Error::InvalidParameter("points must have at least one coordinate"));
    }
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate"));
        }
    }
    Ok(d)
}

fn reduce(points: &[Vec<f64>], centered: bool) -> Result<(Vec<Vec<f64>>, Embedding)> {
    let d = check_points(points)?;
    let origin = if centered {
        let mut mean = vec![0.0; d];
        for p in points {
            crate::math::axpy(1.0 / points.len() as f64, p, &mut mean);
        }
        mean
    } else {
        vec![0.0; d]
    };
    let mut scatter = SymMatrix::zeros(d);
    for p in points {
        scatter.add_outer(1.0, &crate::math::sub(p, &origin));
    }
    let eig = sym_eig(&scatter)?;
    let top = eig.max();
    let rank = if top <= 1e-300 {
        0
    } else {
        eig.eigenvalues.iter().filter(|l| **l > RANK_TOL * top).count()
    };
    if rank == 0 {
        return Err(Error::Degenerate { rank: 0, dim: d });
    }
    if rank == d {
        return Ok((points.to_vec(), Embedding::identity(d)));
    }
    let emb = Embedding { origin, basis: Some(eig.eigenvectors[..rank].to_vec()) };
    Ok((points.iter().map(|p| emb.project(p)).collect(), emb))
}

/// Rewrites points in coordinates of their affine hull. A set that already
/// has full affine rank is returned unchanged with the identity embedding.
pub fn reduce_rank(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Embedding)> {
    reduce(points, true)
}

/// Like [`reduce_rank`] but for the linear span (no centering).
pub fn reduce_span(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Embedding)> {
    reduce(points, false)
}

fn affine_rank(points: &[Vec<f64>], centered: bool) -> Result<usize> {
    reduce(points, centered).map(|(_, e)| e.reduced_dim())
}

/// Minimum-volume enclosing ellipsoid together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct MveeSolution {
    pub ellipsoid: Ellipsoid,
    /// Dual weights on the input points (the optimal design).
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Relative optimality gap `max_i level_i - 1` in lifted units.
    pub gap: f64,
}

/// Minimum-volume ellipsoid enclosing the convex hull of `points`.
///
/// Runs the away-step Frank-Wolfe ascent on the lifted `(d+1)`-dimensional
/// determinant program with points `(a, 1)`. Every input point satisfies
/// `level(a) <= 1 + tol` on return.
pub fn mvee(points: &[Vec<f64>], tol: f64) -> Result<Ellipsoid> {
    solve_mvee(points, tol).map(|s| s.ellipsoid)
}

pub fn solve_mvee(points: &[Vec<f64>], tol: f64) -> Result<MveeSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("mvee tolerance must be positive"));
    }
    let d = check_points(points)?;
    let rank = affine_rank(points, true)?;
    if rank < d {
        return Err(Error::Degenerate { rank, dim: d });
    }
    let lifted: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.push(1.0);
            q
        })
        .collect();
    // level(a) = (M(a) - 1)/d, so a lifted gap eps gives level <= 1 + eps (d+1)/d.
    let eps = tol * d as f64 / (d as f64 + 1.0);
    let design = design::solve(&lifted, eps)?;

    let mut center = vec![0.0; d];
    for (u, p) in design.weights.iter().zip(points) {
        crate::math::axpy(*u, p, &mut center);
    }
    let mut spread = SymMatrix::zeros(d);
    for (u, p) in design.weights.iter().zip(points) {
        if *u > 0.0 {
            spread.add_outer(*u, &crate::math::sub(p, &center));
        }
    }
    Ok(MveeSolution {
        ellipsoid: Ellipsoid { center, shape: spread.scaled(d as f64) },
        weights: design.weights,
        iterations: design.iterations,
        gap: design.gap,
    })
}

/// A finite action set in John's position.
///
/// `actions[i] = H^-1 r_i` where `r_i` are the input points in coordinates of
/// their linear span and `H` is the shape of the minimum-volume
/// origin-centred ellipsoid containing `±r_i`. Under `<x, y> = x^T H y` every
/// action has `<a, a> <= 1` and the loss of action `i` against an ambient
/// loss vector `z` is `<actions[i], embed.pull_back(z)>`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PreprocessedActions {
    pub actions: Vec<Vec<f64>>,
    pub original: Vec<Vec<f64>>,
    pub metric: Metric,
    pub embed: Embedding,
    pub rank: usize,
    /// Optimal design weights over `actions`, as returned by the ellipsoid solver.
    pub design_weights: Vec<f64>,
}

impl PreprocessedActions {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rank
    }

    /// Loss vector in reduced coordinates.
    pub fn induced_loss(&self, z: &[f64]) -> Vec<f64> {
        self.embed.pull_back(z)
    }

    /// `<actions[i], z_reduced>`
    pub fn loss(&self, i: usize, z_reduced: &[f64]) -> f64 {
        self.metric.inner(&self.actions[i], z_reduced)
    }
}

/// See [`preprocess_with`]; uses [`DEFAULT_MVEE_TOL`].
pub fn preprocess(points: &[Vec<f64>]) -> Result<PreprocessedActions> {
    preprocess_with(points, DEFAULT_MVEE_TOL)
}

/// Puts a finite action set in John's position.
///
/// The ellipsoid is the minimum-volume one centred at the origin enclosing
/// `conv(A ∪ -A)`. For origin-symmetric sets this is the minimum-volume
/// ellipsoid of `conv(A)` itself. Centering at the origin keeps losses
/// linear, so a bandit observation `a^T z` is exactly `<a', z'>`.
pub fn preprocess_with(points: &[Vec<f64>], tol: f64) -> Result<PreprocessedActions> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("mvee tolerance must be positive"));
    }
    let (reduced, embed) = reduce_span(points)?;
    let d = embed.reduced_dim();
    let design = design::solve(&reduced, tol)?;

    // ellipsoid {x : x^T X^-1 x <= d}, i.e. H = d X; inflate so every point is inside.
    let mut shape = design.moment.scaled(d as f64);
    let h_inv = crate::numlin::psd_pinv(&shape, crate::numlin::DEFAULT_PINV_TOL)?;
    let worst = reduced
        .iter()
        .map(|r| dot(r, &h_inv.mul_vec(r)))
        .fold(0.0, f64::max);
    let (shape_inv, inflate) = if worst > 1.0 { (h_inv.scaled(1.0 / worst), worst) } else { (h_inv, 1.0) };
    shape = shape.scaled(inflate);

    let actions = reduced.iter().map(|r| shape_inv.mul_vec(r)).collect();
    Ok(PreprocessedActions {
        actions,
        original: points.to_vec(),
        metric: Metric { shape },
        embed,
        rank: d,
        design_weights: design.weights,
    })
}

/// Exploration distribution from John's theorem: contact points `u_i` and
/// weights `mu` with `d * sum mu_i <x, u_i> u_i = x` for all `x`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JohnExploration {
    pub contact_points: Vec<Vec<f64>>,
    /// Index of each contact point in the preprocessed action list.
    pub action_indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub metric: Metric,
}

impl JohnExploration {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// The weights spread onto a distribution over `n_actions` indices.
    pub fn action_distribution(&self, n_actions: usize) -> Vec<f64> {
        let mut mu = vec![0.0; n_actions];
        for (i, w) in self.action_indices.iter().zip(&self.weights) {
            mu[*i] += w;
        }
        mu
    }

    /// `P_mu = sum mu_i u_i u_i^T` (Euclidean second moment of the contact points).
    pub fn second_moment(&self) -> SymMatrix {
        let mut p = SymMatrix::zeros(self.dim());
        for (u, w) in self.contact_points.iter().zip(&self.weights) {
            p.add_outer(*w, u);
        }
        p
    }
}

/// See [`john_weights_with`]; uses [`DEFAULT_CONTACT_TOL`].
pub fn john_weights(pre: &PreprocessedActions, tol: f64) -> Result<JohnExploration> {
    john_weights_with(pre, tol, DEFAULT_CONTACT_TOL)
}

/// Solves for John's exploration weights by nonnegative least squares over
/// the contact points (actions with `<a, a> >= 1 - contact_tol`).
///
/// Writing `w_i = H^{1/2} u_i`, the identity is `sum mu_i w_i w_i^T = I/d`.
/// The fit uses the `d(d+1)/2` upper-triangle equations plus `sum mu_i = 1`,
/// so the basic solution has at most `d(d+1)/2 + 1` nonzero weights. When
/// more points touch the sphere the support is not unique; any basic
/// solution is returned.
pub fn john_weights_with(
    pre: &PreprocessedActions,
    tol: f64,
    contact_tol: f64,
) -> Result<JohnExploration> {
    let d = pre.dim();
    let metric = pre.metric.clone();
    let (root, _) = psd_sqrt_pair(&metric.shape)?;

    let contacts: Vec<usize> = (0..pre.len())
        .filter(|&i| metric.norm_sq(&pre.actions[i]) >= 1.0 - contact_tol)
        .collect();
    if contacts.is_empty() {
        return Err(Error::ResidualTooLarge { residual: 1.0, tol });
    }

    let off = core::f64::consts::SQRT_2;
    let columns: Vec<Vec<f64>> = contacts
        .iter()
        .map(|&i| {
            let w = root.mul_vec(&pre.actions[i]);
            let mut col = Vec::with_capacity(d * (d + 1) / 2 + 1);
            for r in 0..d {
                col.push(w[r] * w[r]);
                for c in r + 1..d {
                    col.push(off * w[r] * w[c]);
                }
            }
            col.push(1.0);
            col
        })
        .collect();
    let mut target = Vec::with_capacity(d * (d + 1) / 2 + 1);
    for r in 0..d {
        target.push(1.0 / d as f64);
        for _ in r + 1..d {
            target.push(0.0);
        }
    }
    target.push(1.0);

    let (mu, _) = nnls(&columns, &target);
    let total: f64 = mu.iter().filter(|w| **w >= PRUNE_BELOW).sum();
    if !(total > 0.0) {
        return Err(Error::ResidualTooLarge { residual: f64::INFINITY, tol });
    }
    let mut contact_points = Vec::new();
    let mut action_indices = Vec::new();
    let mut weights = Vec::new();
    for (k, w) in mu.iter().enumerate() {
        if *w >= PRUNE_BELOW {
            contact_points.push(pre.actions[contacts[k]].clone());
            action_indices.push(contacts[k]);
            weights.push(w / total);
        }
    }
    let john = JohnExploration { contact_points, action_indices, weights, metric };
    let residual = verify_john(&john);
    if residual > tol {
        return Err(Error::ResidualTooLarge { residual, tol });
    }
    Ok(john)
}

/// Frobenius norm of `d * sum mu_i u_i u_i^T H - I`.
pub fn verify_john(j: &JohnExploration) -> f64 {
    let d = j.dim();
    let mut op = j.second_moment().matmul(&j.metric.shape).scaled(d as f64);
    op.add_scaled(-1.0, &SymMatrix::identity(d));
    op.frobenius()
}
