//! Dense complex matrices and the toleranced order predicates built on them.
//!
//! Every order statement in the crate (positivity, the Löwner order, effect
//! membership, the order on completely positive maps) bottoms out in
//! [`CMatrix::is_psd`], which runs a Hermitian eigendecomposition with a
//! relative eigenvalue slack. Indices are 0-based; composite indices of a
//! Kronecker product are lexicographic with the left factor major.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical slack for realizing exact order statements in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Relative slack on the smallest eigenvalue in positivity checks.
    pub eps_psd: f64,
    /// Entrywise equality slack.
    pub eps_eq: f64,
    /// Convergence slack for Kleene iteration.
    pub eps_fix: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eps_psd: 1e-9,
            eps_eq: 1e-9,
            eps_fix: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(eps_psd: f64, eps_eq: f64, eps_fix: f64) -> Result<Self> {
        let tol = Tolerance {
            eps_psd,
            eps_eq,
            eps_fix,
        };
        if [eps_psd, eps_eq, eps_fix]
            .iter()
            .any(|e| !e.is_finite() || *e < 0.0)
        {
            return Err(Error::Invalid(format!("tolerances must be >= 0: {tol:?}")));
        }
        Ok(tol)
    }

    /// Same tolerance with every field replaced by `eps`.
    pub fn uniform(eps: f64) -> Self {
        Tolerance {
            eps_psd: eps,
            eps_eq: eps,
            eps_fix: eps,
        }
    }
}

/// A dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::shape(
                format!("{} entries", rows * cols),
                format!("{} entries", entries.len()),
            ));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CMatrix(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Builds a matrix from row-major real entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::from_row_major(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Invalid("ragged matrix rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// The matrix unit `e_ij` of size `n x n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m.0[(i, j)] = ONE;
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    /// Column vector `|i>` in dimension `n`.
    pub fn ket(n: usize, i: usize) -> Self {
        let mut m = Self::zeros(n, 1);
        m.0[(i, 0)] = ONE;
        m
    }

    pub fn scalar(z: C64) -> Self {
        CMatrix(DMatrix::from_element(1, 1, z))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.0[(i, j)] = z;
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<C64> {
        self.0.transpose().iter().copied().collect()
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Self {
        CMatrix(m)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        CMatrix(self.0.transpose())
    }

    /// Kronecker product `self ⊗ other`, with `self` as the major index.
    pub fn kron(&self, other: &CMatrix) -> Self {
        CMatrix(self.0.kronecker(&other.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix(self.0.map(|z| z * s))
    }

    pub fn scale_complex(&self, z: C64) -> Self {
        CMatrix(self.0.map(|w| w * z))
    }

    pub fn trace(&self) -> C64 {
        self.0.diagonal().iter().sum()
    }

    /// Largest absolute value of any entry (0 for empty matrices).
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == ZERO)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max entry of the anti-Hermitian part `(a - a*)/2`.
    pub fn anti_hermitian_residual(&self) -> f64 {
        let n = self.rows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.0[(i, j)] - self.0[(j, i)].conj()).norm() / 2.0;
                worst = worst.max(d);
            }
        }
        worst
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    fn hermitian_slack(&self, tol: &Tolerance) -> f64 {
        tol.eps_eq * self.max_abs().max(1.0)
    }

    /// Hermitian projection `(a + a*)/2`; fails if the anti-Hermitian part
    /// exceeds `eps_eq` (relative to the largest entry).
    pub fn hermitian_part(&self, tol: &Tolerance) -> Result<CMatrix> {
        self.require_square()?;
        let residual = self.anti_hermitian_residual();
        if residual > self.hermitian_slack(tol) {
            return Err(Error::NotHermitian { residual });
        }
        Ok(CMatrix((&self.0 + self.0.adjoint()).map(|z| z * 0.5)))
    }

    /// Eigenvalues (ascending) and eigenvectors (as columns) of a Hermitian matrix.
    pub fn hermitian_eigen(&self, tol: &Tolerance) -> Result<(Vec<f64>, CMatrix)> {
        let h = self.hermitian_part(tol)?;
        let n = h.rows();
        if n == 0 {
            return Ok((Vec::new(), CMatrix::zeros(0, 0)));
        }
        if n == 1 {
            return Ok((vec![h.0[(0, 0)].re], CMatrix::identity(1)));
        }
        let eig = SymmetricEigen::new(h.0);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok((values, CMatrix(vectors)))
    }

    /// Eigenvalues (ascending) of a Hermitian matrix.
    pub fn hermitian_eigenvalues(&self, tol: &Tolerance) -> Result<Vec<f64>> {
        let h = self.hermitian_part(tol)?;
        match h.rows() {
            0 => Ok(Vec::new()),
            1 => Ok(vec![h.0[(0, 0)].re]),
            _ => {
                let mut v: Vec<f64> = h.0.symmetric_eigenvalues().iter().copied().collect();
                v.sort_by(f64::total_cmp);
                Ok(v)
            }
        }
    }

    /// Smallest eigenvalue of a Hermitian matrix (`+inf` for the empty matrix).
    pub fn min_eigenvalue(&self, tol: &Tolerance) -> Result<f64> {
        Ok(self
            .hermitian_eigenvalues(tol)?
            .first()
            .copied()
            .unwrap_or(f64::INFINITY))
    }

    /// Positive semidefiniteness up to `tol`.
    ///
    /// True iff the matrix is Hermitian within `eps_eq` and its smallest
    /// eigenvalue is at least `-eps_psd * max(1, ||a||)`.
    pub fn is_psd(&self, tol: &Tolerance) -> Result<bool> {
        self.require_square()?;
        if self.anti_hermitian_residual() > self.hermitian_slack(tol) {
            return Ok(false);
        }
        let eigs = self.hermitian_eigenvalues(tol)?;
        let (Some(&lo), Some(&hi)) = (eigs.first(), eigs.last()) else {
            return Ok(true);
        };
        let norm = lo.abs().max(hi.abs());
        Ok(lo >= -tol.eps_psd * norm.max(1.0))
    }

    /// Whether `0 <= a <= 1`.
    pub fn is_effect(&self, tol: &Tolerance) -> Result<bool> {
        self.require_square()?;
        Ok(self.is_psd(tol)? && loewner_leq(self, &CMatrix::identity(self.rows()), tol)?)
    }

    /// Spectral norm of a Hermitian matrix.
    pub fn hermitian_norm(&self, tol: &Tolerance) -> Result<f64> {
        let eigs = self.hermitian_eigenvalues(tol)?;
        Ok(eigs.iter().map(|x| x.abs()).fold(0.0, f64::max))
    }
}

/// The Löwner order: `a <= b` iff `b - a` is positive.
pub fn loewner_leq(a: &CMatrix, b: &CMatrix, tol: &Tolerance) -> Result<bool> {
    a.require_square()?;
    if a.shape() != b.shape() {
        return Err(Error::shape(
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    (b - a).is_psd(tol)
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix{:?}[", self.shape())?;
        for i in 0..self.rows() {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                let z = self.0[(i, j)];
                if z.im == 0.0 {
                    write!(f, "{}", z.re)?;
                } else {
                    write!(f, "{}{:+}i", z.re, z.im)?;
                }
            }
        }
        write!(f, "]")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

/// Complex numbers serialize as `[re, im]`; matrices as a list of rows.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|j| {
                        let z = self.0[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<C64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        CMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn real(rows: usize, cols: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_real(rows, cols, v).unwrap()
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(CMatrix::identity(2).adjoint(), CMatrix::identity(2));
        assert_eq!(
            real(2, 2, &[0., 1., 0., 0.]).adjoint(),
            real(2, 2, &[0., 0., 1., 0.])
        );
        let i = CMatrix::scalar(C64::new(0.0, 1.0));
        assert_eq!(i.adjoint(), CMatrix::scalar(C64::new(0.0, -1.0)));
    }

    #[test]
    fn kron_examples() {
        assert_eq!(
            CMatrix::identity(2).kron(&CMatrix::identity(2)),
            CMatrix::identity(4)
        );
        let k = CMatrix::unit(2, 0, 0).kron(&CMatrix::unit(2, 1, 1));
        assert_eq!(k, CMatrix::unit(4, 1, 1));
        assert_eq!(
            CMatrix::diag(&[1., 2.]).kron(&CMatrix::diag(&[3., 4.])),
            CMatrix::diag(&[3., 4., 6., 8.])
        );
        let one = CMatrix::identity(1);
        let a = real(2, 3, &[1., 2., 3., 4., 5., 6.]);
        assert_eq!(one.kron(&a), a);
        assert_eq!(a.kron(&one), a);
    }

    #[test]
    fn psd_examples() {
        assert!(CMatrix::identity(2).is_psd(&tol()).unwrap());
        assert!(!real(2, 2, &[1., 2., 2., 1.]).is_psd(&tol()).unwrap());
        assert!(CMatrix::zeros(3, 3).is_psd(&tol()).unwrap());
        assert!(matches!(
            CMatrix::zeros(2, 3).is_psd(&tol()),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn non_hermitian_is_not_psd_and_eigen_rejects_it() {
        let a = real(2, 2, &[1., 1., 0., 1.]);
        assert!(!a.is_psd(&tol()).unwrap());
        assert!(matches!(
            a.hermitian_eigenvalues(&tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn loewner_examples() {
        let t = tol();
        let i2 = CMatrix::identity(2);
        assert!(loewner_leq(&CMatrix::zeros(2, 2), &i2, &t).unwrap());
        let x = CMatrix::diag(&[0.5, -0.5]);
        assert!(loewner_leq(&x, &i2.scale(0.5), &t).unwrap());
        assert!(loewner_leq(&i2.scale(-0.5), &x, &t).unwrap());
        assert!(!loewner_leq(&i2, &CMatrix::zeros(2, 2), &t).unwrap());
        assert!(loewner_leq(&i2, &CMatrix::identity(3), &t).is_err());
    }

    #[test]
    fn effect_examples() {
        let t = tol();
        assert!(CMatrix::unit(2, 0, 0).is_effect(&t).unwrap());
        assert!(!CMatrix::identity(2).scale(2.0).is_effect(&t).unwrap());
        assert!(CMatrix::identity(2).scale(0.5).is_effect(&t).unwrap());
        assert!(CMatrix::zeros(1, 2).is_effect(&t).is_err());
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let a = real(3, 3, &[2., 1., 0., 1., 2., 1., 0., 1., 2.]);
        let (vals, vecs) = a.hermitian_eigen(&tol()).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::diag(&vals);
        let back = &(&vecs * &d) * &vecs.adjoint();
        assert!(back.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn serde_uses_re_im_pairs() {
        let m = CMatrix::from_rows(&[vec![C64::new(1.0, 2.0), ZERO]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,2.0],[0.0,0.0]]]");
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            CMatrix::from_real(1, 1, &[f64::NAN]),
            Err(Error::NonFinite)
        );
        assert!(Tolerance::new(-1.0, 0.0, 0.0).is_err());
    }
}
