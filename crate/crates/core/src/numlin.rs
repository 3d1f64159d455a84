//! Dense symmetric linear algebra.
//!
//! Everything downstream (pseudo-inverses, minimum eigenvalues, matrix square
//! roots) goes through [`sym_eig`], a cyclic Jacobi eigensolver. Dimensions
//! are small (a few hundred at most) so the cubic cost per sweep is fine.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt};
use crate::{Error, Result};

/// Default relative eigenvalue cutoff for [`psd_pinv`].
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100;

/// A square matrix stored row-major. Symmetry is checked where it matters
/// (see [`sym_eig`]), not on construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.entries[i * m.dim + i] = *d;
        }
        m
    }

    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Ok(Self { dim, entries })
    }

    /// `c * x x^T`
    pub fn outer(x: &[f64], c: f64) -> Self {
        let mut m = Self::zeros(x.len());
        m.add_outer(c, x);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    /// `self += c * x x^T`
    pub fn add_outer(&mut self, c: f64, x: &[f64]) {
        let n = self.dim;
        for i in 0..n {
            let ci = c * x[i];
            for j in 0..n {
                self.entries[i * n + j] += ci * x[j];
            }
        }
    }

    pub fn add_scaled(&mut self, c: f64, other: &SymMatrix) {
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| v * c).collect() }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| crate::math::dot(self.row(i), x)).collect()
    }

    /// Plain matrix product. The result is only symmetric when the factors commute.
    pub fn matmul(&self, other: &SymMatrix) -> SymMatrix {
        let n = self.dim;
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `B^T self B` where `b` is given by its columns.
    pub fn congruence(&self, b: &SymMatrix) -> SymMatrix {
        b.transpose().matmul(&self.matmul(b))
    }

    pub fn transpose(&self) -> SymMatrix {
        let n = self.dim;
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        sqrt(self.entries.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(abs(*v)))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max(abs(self.get(i, j) - self.get(j, i)));
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectralDecomp {
    /// `V f(diag(lambda)) V^T`
    pub fn rebuild_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.eigenvalues.len();
        let mut out = SymMatrix::zeros(n);
        for (lam, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let c = f(*lam);
            if c != 0.0 {
                out.add_outer(c, v);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.rebuild_with(|l| l)
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.first().unwrap_or(&0.0)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvectors are sign-normalised so their largest-magnitude entry is
/// positive, which makes the output deterministic for repeated eigenvalues
/// only up to the basis chosen by the rotation order.
pub fn sym_eig(m: &SymMatrix) -> Result<SpectralDecomp> {
    let n = m.dim();
    let scale = m.max_abs().max(1.0);
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if m.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix entry"));
    }

    // Work on the symmetrised copy.
    let mut a = m.clone();
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, s);
            a.set(j, i, s);
        }
    }
    let mut v = SymMatrix::identity(n);
    let fro2: f64 = a.entries.iter().map(|x| x * x).sum();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off <= 1e-32 * fro2 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if theta.is_finite() {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (abs(theta) + sqrt(theta * theta + 1.0))
                } else {
                    0.0
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut col: Vec<f64> = (0..n).map(|i| v.get(i, k)).collect();
            let lead = col.iter().cloned().fold(0.0, |best: f64, x| if abs(x) > abs(best) { x } else { best });
            if lead < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            (a.get(k, k), col)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(core::cmp::Ordering::Equal));
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(SpectralDecomp { eigenvalues, eigenvectors })
}

fn rotate(a: &mut SymMatrix, v: &mut SymMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.dim;
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Moore-Penrose pseudo-inverse of a PSD matrix. Eigenvalues at or below
/// `rel_tol * lambda_max` are treated as zero.
pub fn psd_pinv(m: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    pinv_from(&eig, rel_tol)
}

pub(crate) fn pinv_from(eig: &SpectralDecomp, rel_tol: f64) -> Result<SymMatrix> {
    let top = eig.eigenvalues.iter().fold(0.0, |a: f64, b| a.max(abs(*b)));
    let cutoff = rel_tol * top;
    if eig.min() < -cutoff.max(1e-300) && eig.min() < -SYMMETRY_TOL * top {
        return Err(Error::NotPsd { min_eigenvalue: eig.min() });
    }
    Ok(eig.rebuild_with(|l| if l > cutoff { 1.0 / l } else { 0.0 }))
}

pub fn min_eig(m: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(m)?.min())
}

/// Principal square root of a PSD matrix and of its pseudo-inverse.
pub fn psd_sqrt_pair(m: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let eig = sym_eig(m)?;
    if eig.min() < -SYMMETRY_TOL * eig.max().max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: eig.min() });
    }
    let cutoff = DEFAULT_PINV_TOL * eig.max();
    let root = eig.rebuild_with(|l| if l > 0.0 { sqrt(l) } else { 0.0 });
    let inv_root = eig.rebuild_with(|l| if l > cutoff { 1.0 / sqrt(l) } else { 0.0 });
    Ok((root, inv_root))
}

/// Least squares `min |A x - b|` by Householder QR. `columns[j]` is the j-th
/// column of `A`. Columns that are numerically dependent on earlier ones get
/// coefficient zero.
pub fn lstsq(columns: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = columns.len();
    let m = b.len();
    let mut r: Vec<Vec<f64>> = columns.to_vec();
    let mut rhs = b.to_vec();
    let steps = k.min(m);
    let col_scale = columns.iter().map(|c| crate::math::norm2(c)).fold(0.0, f64::max);
    let mut usable = vec![false; k];

    for j in 0..steps {
        let norm = crate::math::norm2(&r[j][j..]);
        if norm <= 1e-13 * col_scale.max(1e-300) {
            continue;
        }
        usable[j] = true;
        let alpha = if r[j][j] > 0.0 { -norm } else { norm };
        let mut h: Vec<f64> = r[j][j..].to_vec();
        h[0] -= alpha;
        let hn2: f64 = h.iter().map(|x| x * x).sum();
        if hn2 == 0.0 {
            continue;
        }
        for col in r.iter_mut().skip(j) {
            let proj = crate::math::dot(&h, &col[j..]) * 2.0 / hn2;
            for (ci, hi) in col[j..].iter_mut().zip(&h) {
                *ci -= proj * hi;
            }
        }
        let proj = crate::math::dot(&h, &rhs[j..]) * 2.0 / hn2;
        for (ri, hi) in rhs[j..].iter_mut().zip(&h) {
            *ri -= proj * hi;
        }
    }

    let mut x = vec![0.0; k];
    for j in (0..steps).rev() {
        if !usable[j] {
            continue;
        }
        let mut s = rhs[j];
        for l in j + 1..steps {
            s -= r[l][j] * x[l];
        }
        x[j] = s / r[j][j];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut impl Rng) -> SymMatrix {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> SymMatrix {
        let mut m = SymMatrix::zeros(n);
        for _ in 0..rank {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.add_outer(1.0, &x);
        }
        m
    }

    fn diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
        let mut d = a.clone();
        d.add_scaled(-1.0, b);
        d.frobenius()
    }

    #[test]
    fn identity_eigenvalues() {
        let e = sym_eig(&SymMatrix::identity(2)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenpairs() {
        let e = sym_eig(&SymMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(e.eigenvectors[0], vec![0.0, 1.0]);
        assert_eq!(e.eigenvectors[1], vec![1.0, 0.0]);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 9] {
            let m = random_sym(n, &mut rng);
            let e = sym_eig(&m).unwrap();
            assert!(diff(&e.reconstruct(), &m) < 1e-8);
            for i in 0..n {
                for j in 0..n {
                    let d = crate::math::dot(&e.eigenvectors[i], &e.eigenvectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-8);
                }
            }
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric { .. })));
        assert!(matches!(min_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn pinv_simple_cases() {
        let i3 = SymMatrix::identity(3);
        assert!(diff(&psd_pinv(&i3, DEFAULT_PINV_TOL).unwrap(), &i3) < 1e-15);
        let p = psd_pinv(&SymMatrix::from_diag(&[2.0, 0.0]), DEFAULT_PINV_TOL).unwrap();
        assert!(diff(&p, &SymMatrix::from_diag(&[0.5, 0.0])) < 1e-15);
    }

    #[test]
    fn pinv_rank_deficient_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_psd(5, 3, &mut rng);
        let p = psd_pinv(&m, DEFAULT_PINV_TOL).unwrap();
        assert!(diff(&m.matmul(&p).matmul(&m), &m) < 1e-8);
        // (M+)+ = M on the range
        let pp = psd_pinv(&p, DEFAULT_PINV_TOL).unwrap();
        assert!(diff(&pp, &m) < 1e-7);
    }

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut m = random_psd(4, 4, &mut rng);
        m.add_scaled(0.1, &SymMatrix::identity(4));
        let p = psd_pinv(&m, DEFAULT_PINV_TOL).unwrap();
        assert!(diff(&p.matmul(&m), &SymMatrix::identity(4)) < 1e-8);
    }

    #[test]
    fn pinv_rejects_indefinite() {
        let m = SymMatrix::from_diag(&[1.0, -0.5]);
        assert!(matches!(psd_pinv(&m, DEFAULT_PINV_TOL), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn min_eig_cases() {
        assert_eq!(min_eig(&SymMatrix::identity(2)).unwrap(), 1.0);
        assert!((min_eig(&SymMatrix::from_diag(&[3.0, 0.2])).unwrap() - 0.2).abs() < 1e-15);
        // (gamma/d) I + rank one, d = 4, gamma = 0.2: bottom eigenvalue is gamma/d.
        let mut m = SymMatrix::identity(4).scaled(0.2 / 4.0);
        m.add_outer(1.0, &[0.3, -0.1, 0.8, 0.2]);
        let lo = min_eig(&m).unwrap();
        assert!(lo >= 0.05 - 1e-12, "{lo}");
    }

    #[test]
    fn psd_eigenvalues_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_psd(6, 2, &mut rng);
            let e = sym_eig(&m).unwrap();
            assert!(e.min() >= -1e-9 * e.max());
        }
    }

    #[test]
    fn sqrt_pair_multiplies_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = random_psd(4, 4, &mut rng);
        m.add_scaled(0.5, &SymMatrix::identity(4));
        let (r, ri) = psd_sqrt_pair(&m).unwrap();
        assert!(diff(&r.matmul(&r), &m) < 1e-10);
        assert!(diff(&r.matmul(&ri), &SymMatrix::identity(4)) < 1e-10);
    }

    #[test]
    fn lstsq_overdetermined() {
        // y = 2 + 3x, exact fit
        let xs = [0.0, 1.0, 2.0, 3.0];
        let cols = vec![vec![1.0; 4], xs.to_vec()];
        let b: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let c = lstsq(&cols, &b);
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_dependent_column_gets_zero() {
        let cols = vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]];
        let c = lstsq(&cols, &[1.0, 1.0, 0.0]);
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert_eq!(c[1], 0.0);
    }
}
