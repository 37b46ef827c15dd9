//! Dense complex matrices and coefficient vectors in the orthonormal basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FockError, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Coefficients of `f = Σ c_k e_k` in the orthonormal monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVec(pub DVector<C64>);

impl CoeffVec {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn from_vec(v: Vec<C64>) -> Self {
        Self(DVector::from_vec(v))
    }

    /// The basis vector `e_k` in dimension `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[k] = ONE;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Norm in `F²`, i.e. the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `⟨self, other⟩`, linear in the first slot.
    pub fn inner(&self, other: &CoeffVec) -> C64 {
        other.0.dotc(&self.0)
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            Self(&self.0 / C64::new(n, 0.0))
        }
    }
}

/// An operator on the truncated space, stored as `M[k][j] = ⟨A e_j, e_k⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpMatrix(pub DMatrix<C64>);

/// JSON layout `{ "n": N, "re": [[..]], "im": [[..]] }` (row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl OpMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn<F: FnMut(usize, usize) -> C64>(n: usize, f: F) -> Self {
        Self(DMatrix::from_fn(n, n, f))
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, rhs: &OpMatrix) -> Self {
        Self(&self.0 * &rhs.0)
    }

    pub fn add(&self, rhs: &OpMatrix) -> Self {
        Self(&self.0 + &rhs.0)
    }

    pub fn sub(&self, rhs: &OpMatrix) -> Self {
        Self(&self.0 - &rhs.0)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn apply(&self, v: &CoeffVec) -> CoeffVec {
        CoeffVec(&self.0 * &v.0)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Leading `m × m` block; truncation corrupts the trailing rows/columns
    /// of shift-type operators, so identity checks use this.
    pub fn leading_block(&self, m: usize) -> Self {
        let m = m.min(self.dim());
        Self(self.0.view((0, 0), (m, m)).into_owned())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.0 - self.0.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    /// Spectral norm. Power iteration on `A*A` with a residual certificate,
    /// falling back to a full SVD after `10·N` steps.
    pub fn op_norm(&self) -> f64 {
        match power_norm(&self.0, 10 * self.dim().max(1)) {
            Some(v) => v,
            None => self.op_norm_svd(),
        }
    }

    /// Spectral norm from the full singular value decomposition.
    pub fn op_norm_svd(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let svd = SVD::new(self.0.clone(), false, false);
        svd.singular_values.iter().copied().fold(0.0, f64::max)
    }

    pub fn singular_values(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut s: Vec<f64> = SVD::new(self.0.clone(), false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Square root of a Hermitian PSD matrix. Eigenvalues down to `-neg_tol`
    /// are clamped to zero; anything lower is reported as an error.
    pub fn psd_sqrt(&self, neg_tol: f64) -> Result<Self> {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -neg_tol {
            return Err(FockError::NonPsdGram(min));
        }
        let sq = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
        let u = &eig.eigenvectors;
        Ok(Self(u * DMatrix::from_diagonal(&sq) * u.adjoint()))
    }

    pub fn to_json(&self) -> MatrixJson {
        let n = self.dim();
        MatrixJson {
            n,
            re: (0..n).map(|i| (0..n).map(|j| self.0[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| self.0[(i, j)].im).collect()).collect(),
        }
    }

    pub fn from_json(m: &MatrixJson) -> Result<Self> {
        let n = m.n;
        let shape_ok = m.re.len() == n
            && m.im.len() == n
            && m.re.iter().all(|r| r.len() == n)
            && m.im.iter().all(|r| r.len() == n);
        if !shape_ok {
            return invalid(format!("matrix JSON rows do not match n = {n}"));
        }
        let out = Self::from_fn(n, |i, j| C64::new(m.re[i][j], m.im[i][j]));
        if out.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("matrix JSON contains non-finite entries");
        }
        Ok(out)
    }
}

fn power_norm(a: &DMatrix<C64>, max_iter: usize) -> Option<f64> {
    let n = a.ncols();
    if n == 0 {
        return Some(0.0);
    }
    if a.iter().all(|z| *z == ZERO) {
        return Some(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed0f_f0c4);
    let mut v = DVector::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    v /= C64::new(v.norm(), 0.0);
    let ah = a.adjoint();
    for _ in 0..max_iter {
        let w = a * &v;
        let u = &ah * &w;
        let lambda = w.norm_squared();
        if lambda == 0.0 {
            return None;
        }
        let resid = (&u - &v * C64::new(lambda, 0.0)).norm();
        if resid <= 1e-11 * lambda {
            return Some(lambda.sqrt());
        }
        let un = u.norm();
        v = u / C64::new(un, 0.0);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> OpMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OpMatrix::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn op_norm_of_identity_is_one() {
        assert!((OpMatrix::identity(7).op_norm() - 1.0).abs() < 1e-12);
        assert_eq!(OpMatrix::zeros(5).op_norm(), 0.0);
    }

    #[test]
    fn power_iteration_matches_svd() {
        for seed in 0..5 {
            let a = random_matrix(12, seed);
            let p = a.op_norm();
            let s = a.op_norm_svd();
            assert!((p - s).abs() <= 1e-8 * s, "{p} vs {s}");
        }
    }

    #[test]
    fn degenerate_top_singular_values_fall_back_cleanly() {
        let d: Vec<C64> = [1.0, 1.0 - 1e-9, 0.5].iter().map(|&x| C64::new(x, 0.0)).collect();
        let a = OpMatrix::from_diagonal(&d);
        assert!((a.op_norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let a = random_matrix(6, 9);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let b = random_matrix(6, 3);
        let h = b.compose(&b.adjoint());
        let r = h.psd_sqrt(1e-10).unwrap();
        assert!(r.compose(&r).sub(&h).max_abs() < 1e-10);
        let neg = OpMatrix::identity(3).scale(C64::new(-1.0, 0.0));
        assert!(matches!(neg.psd_sqrt(1e-10), Err(FockError::NonPsdGram(_))));
    }

    #[test]
    fn json_round_trip() {
        let a = random_matrix(4, 1);
        let back = OpMatrix::from_json(&a.to_json()).unwrap();
        assert_eq!(a, back);
        let bad = MatrixJson { n: 2, re: vec![vec![0.0]], im: vec![] };
        assert!(OpMatrix::from_json(&bad).is_err());
    }
}
