//! Completely positive maps `M_n → M_m` between single matrix blocks.
//!
//! Maps are held in Kraus form `E(ρ) = Σ_k A_k ρ A_k†` (Schrödinger
//! orientation, each `A_k` is `m x n`); the Choi matrix
//! `Σ_ij E(e_ij) ⊗ e_ij` (output factor major) is computed on demand and cached.
//! The Heisenberg action is `x ↦ Σ_k A_k† x A_k`.

use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance, C64, ZERO};

/// A completely positive map `M_n → M_m` as a list of `m x n` Kraus operators.
///
/// The empty list is the zero map `⊥`.
#[derive(Clone)]
pub struct KrausMap {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<CMatrix>,
    choi: OnceLock<ChoiMatrix>,
}

impl std::fmt::Debug for KrausMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KrausMap")
            .field("in_dim", &self.in_dim)
            .field("out_dim", &self.out_dim)
            .field("kraus", &self.kraus)
            .finish()
    }
}

impl KrausMap {
    pub fn new(in_dim: usize, out_dim: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        for a in &kraus {
            if a.shape() != (out_dim, in_dim) {
                return Err(Error::shape(
                    format!("{out_dim}x{in_dim} Kraus operator"),
                    format!("{}x{}", a.rows(), a.cols()),
                ));
            }
        }
        Ok(Self::from_parts(in_dim, out_dim, kraus))
    }

    fn from_parts(in_dim: usize, out_dim: usize, kraus: Vec<CMatrix>) -> Self {
        KrausMap {
            in_dim,
            out_dim,
            kraus,
            choi: OnceLock::new(),
        }
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        Self::from_parts(in_dim, out_dim, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts(n, n, vec![CMatrix::identity(n)])
    }

    /// `ρ ↦ U ρ U†`.
    pub fn conjugation(u: CMatrix) -> Result<Self> {
        let (m, n) = u.shape();
        Self::new(n, m, vec![u])
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn is_zero(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn choi(&self) -> &ChoiMatrix {
        self.choi.get_or_init(|| kraus_to_choi(self))
    }

    /// `Σ_k A_k ρ A_k†`.
    pub fn apply_schrodinger(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.shape() != (self.in_dim, self.in_dim) {
            return Err(Error::shape(
                format!("{0}x{0} state", self.in_dim),
                format!("{:?}", rho.shape()),
            ));
        }
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for a in &self.kraus {
            out = &out + &(&(a * rho) * &a.adjoint());
        }
        Ok(out)
    }

    /// `Σ_k A_k† x A_k`.
    pub fn apply_heisenberg(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.shape() != (self.out_dim, self.out_dim) {
            return Err(Error::shape(
                format!("{0}x{0} observable", self.out_dim),
                format!("{:?}", x.shape()),
            ));
        }
        let mut out = CMatrix::zeros(self.in_dim, self.in_dim);
        for a in &self.kraus {
            out = &out + &(&(&a.adjoint() * x) * a);
        }
        Ok(out)
    }

    /// `Σ_k A_k† A_k`, the Heisenberg image of the unit.
    pub fn heisenberg_unit_image(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.in_dim, self.in_dim);
        for a in &self.kraus {
            out = &out + &(&a.adjoint() * a);
        }
        out
    }

    /// `g ∘ f` (apply `f` first); Kraus set `{B_l A_k}`.
    pub fn compose(g: &KrausMap, f: &KrausMap) -> Result<KrausMap> {
        if f.out_dim != g.in_dim {
            return Err(Error::shape(
                format!("inner dimension {}", g.in_dim),
                format!("{}", f.out_dim),
            ));
        }
        let kraus = g
            .kraus
            .iter()
            .flat_map(|b| f.kraus.iter().map(move |a| b * a))
            .filter(|k| !k.is_zero())
            .collect();
        Ok(Self::from_parts(f.in_dim, g.out_dim, kraus).compact())
    }

    /// `f ⊗ g`; Kraus set `{A_k ⊗ B_l}`.
    pub fn tensor(f: &KrausMap, g: &KrausMap) -> KrausMap {
        let kraus = f
            .kraus
            .iter()
            .flat_map(|a| g.kraus.iter().map(move |b| a.kron(b)))
            .filter(|k| !k.is_zero())
            .collect();
        Self::from_parts(f.in_dim * g.in_dim, f.out_dim * g.out_dim, kraus).compact()
    }

    /// Pointwise sum `f + g`.
    pub fn sum(&self, other: &KrausMap) -> Result<KrausMap> {
        if (self.in_dim, self.out_dim) != (other.in_dim, other.out_dim) {
            return Err(Error::shape(
                format!("{}->{}", self.in_dim, self.out_dim),
                format!("{}->{}", other.in_dim, other.out_dim),
            ));
        }
        let mut kraus = self.kraus.clone();
        kraus.extend(other.kraus.iter().cloned());
        Ok(Self::from_parts(self.in_dim, self.out_dim, kraus).compact())
    }

    /// `s · E` for `s >= 0` (Kraus operators scale by `√s`).
    pub fn scaled(&self, s: f64) -> Result<KrausMap> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Invalid(format!("scale factor {s} must be >= 0")));
        }
        if s == 0.0 {
            return Ok(Self::zero(self.in_dim, self.out_dim));
        }
        let r = s.sqrt();
        Ok(Self::from_parts(
            self.in_dim,
            self.out_dim,
            self.kraus.iter().map(|a| a.scale(r)).collect(),
        ))
    }

    /// The Heisenberg-picture map `x ↦ Σ A† x A`, itself written in Kraus form
    /// with operators `A_k†`. Involutive on the Kraus data.
    pub fn dual(&self) -> KrausMap {
        Self::from_parts(
            self.out_dim,
            self.in_dim,
            self.kraus.iter().map(CMatrix::adjoint).collect(),
        )
    }

    /// Re-derives a minimal Kraus set when the current one exceeds the Choi rank bound `n·m`.
    pub fn compact(self) -> KrausMap {
        if self.kraus.len() > (self.in_dim * self.out_dim).max(1) {
            self.canonical()
        } else {
            self
        }
    }

    /// Kraus operators from the eigendecomposition of the Choi matrix.
    pub fn canonical(&self) -> KrausMap {
        let (n, m) = (self.in_dim, self.out_dim);
        if n * m == 1 {
            let w: f64 = self.kraus.iter().map(|a| a.get(0, 0).norm_sqr()).sum();
            let kraus = if w > 0.0 {
                vec![CMatrix::scalar(C64::new(w.sqrt(), 0.0))]
            } else {
                vec![]
            };
            return Self::from_parts(n, m, kraus);
        }
        let choi = self.choi();
        choi_kraus(&choi.matrix, n, m)
    }

    /// Builds a Kraus map from a Choi matrix, which must be PSD within `tol`.
    pub fn from_choi(choi: &ChoiMatrix, tol: &Tolerance) -> Result<KrausMap> {
        if !choi.is_cp(tol)? {
            return Err(Error::Invariant("Choi matrix is not positive".into()));
        }
        Ok(choi_kraus(&choi.matrix, choi.in_dim, choi.out_dim))
    }

    pub fn is_trace_nonincreasing(&self, tol: &Tolerance) -> Result<bool> {
        crate::matrix::loewner_leq(
            &self.heisenberg_unit_image(),
            &CMatrix::identity(self.in_dim),
            tol,
        )
    }

    pub fn is_trace_preserving(&self, tol: &Tolerance) -> bool {
        self.heisenberg_unit_image()
            .max_abs_diff(&CMatrix::identity(self.in_dim))
            <= tol.eps_eq
    }

    /// Largest entry of the difference of the two Choi matrices.
    pub fn choi_distance(&self, other: &KrausMap) -> Result<f64> {
        if (self.in_dim, self.out_dim) != (other.in_dim, other.out_dim) {
            return Err(Error::shape(
                format!("{}->{}", self.in_dim, self.out_dim),
                format!("{}->{}", other.in_dim, other.out_dim),
            ));
        }
        Ok(self.choi().matrix.max_abs_diff(&other.choi().matrix))
    }
}

fn choi_kraus(c: &CMatrix, n: usize, m: usize) -> KrausMap {
    let tol = Tolerance::uniform(1e-6);
    let (vals, vecs) = c
        .hermitian_eigen(&tol)
        .expect("Choi matrices of CP maps are Hermitian");
    let top = vals.iter().copied().fold(0.0, f64::max);
    let mut kraus = Vec::new();
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda <= top * 1e-15 || lambda <= 0.0 {
            continue;
        }
        let r = lambda.sqrt();
        kraus.push(CMatrix::from_fn(m, n, |a, i| vecs.get(a * n + i, k) * r));
    }
    KrausMap::from_parts(n, m, kraus)
}

/// `Σ_k vec(A_k) vec(A_k)†` with row-major `vec`, equal to `Σ_ij E(e_ij) ⊗ e_ij`.
pub fn kraus_to_choi(k: &KrausMap) -> ChoiMatrix {
    let d = k.in_dim * k.out_dim;
    let mut acc = nalgebra::DMatrix::<C64>::zeros(d, d);
    for a in &k.kraus {
        let v = DVector::from_vec(a.row_major());
        acc += &v * v.adjoint();
    }
    ChoiMatrix {
        in_dim: k.in_dim,
        out_dim: k.out_dim,
        matrix: CMatrix::from_nalgebra(acc),
    }
}

/// Choi matrix `Σ_ij E(e_ij) ⊗ e_ij` of a linear map `M_n → M_m`; entry
/// `((a,i),(b,j))` sits at row `a·n + i`, column `b·n + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiMatrix {
    pub in_dim: usize,
    pub out_dim: usize,
    pub matrix: CMatrix,
}

impl ChoiMatrix {
    pub fn new(in_dim: usize, out_dim: usize, matrix: CMatrix) -> Result<Self> {
        let d = in_dim * out_dim;
        if matrix.shape() != (d, d) {
            return Err(Error::shape(
                format!("{d}x{d} Choi matrix"),
                format!("{:?}", matrix.shape()),
            ));
        }
        Ok(ChoiMatrix {
            in_dim,
            out_dim,
            matrix,
        })
    }

    /// Choi matrix of the transpose map `e_ij ↦ e_ji` on `M_n` (the swap matrix).
    pub fn transpose_map(n: usize) -> Self {
        let matrix = CMatrix::from_fn(n * n, n * n, |r, c| {
            let (a, i) = (r / n, r % n);
            let (b, j) = (c / n, c % n);
            if a == j && b == i {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        ChoiMatrix {
            in_dim: n,
            out_dim: n,
            matrix,
        }
    }

    pub fn is_cp(&self, tol: &Tolerance) -> Result<bool> {
        self.matrix.is_psd(tol)
    }

    /// `E(e_ij)` read off the Choi matrix.
    pub fn image_of_unit(&self, i: usize, j: usize) -> CMatrix {
        let n = self.in_dim;
        CMatrix::from_fn(self.out_dim, self.out_dim, |a, b| {
            self.matrix.get(a * n + i, b * n + j)
        })
    }

    /// `E(ρ) = Σ_ij ρ_ij E(e_ij)`.
    pub fn apply_schrodinger(&self, rho: &CMatrix) -> Result<CMatrix> {
        let n = self.in_dim;
        if rho.shape() != (n, n) {
            return Err(Error::shape(format!("{n}x{n}"), format!("{:?}", rho.shape())));
        }
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for i in 0..n {
            for j in 0..n {
                let w = rho.get(i, j);
                if w != ZERO {
                    out = &out + &self.image_of_unit(i, j).scale_complex(w);
                }
            }
        }
        Ok(out)
    }

    /// `E*(x)`, determined by `tr(E*(x) e_ij) = tr(x E(e_ij))`.
    pub fn apply_heisenberg(&self, x: &CMatrix) -> Result<CMatrix> {
        let (n, m) = (self.in_dim, self.out_dim);
        if x.shape() != (m, m) {
            return Err(Error::shape(format!("{m}x{m}"), format!("{:?}", x.shape())));
        }
        Ok(CMatrix::from_fn(n, n, |j, i| {
            (&x.clone() * &self.image_of_unit(i, j)).trace()
        }))
    }

    /// `E*(1)`: the transposed partial trace of the Choi matrix over the output.
    pub fn heisenberg_unit_image(&self) -> CMatrix {
        let (n, m) = (self.in_dim, self.out_dim);
        CMatrix::from_fn(n, n, |j, i| {
            (0..m).map(|a| self.matrix.get(a * n + i, a * n + j)).sum()
        })
    }
}

pub fn is_cp(c: &ChoiMatrix, tol: &Tolerance) -> Result<bool> {
    c.is_cp(tol)
}

/// The order on CP maps: `f ⊑ g` iff `g - f` is completely positive.
pub fn cp_leq(f: &KrausMap, g: &KrausMap, tol: &Tolerance) -> Result<bool> {
    Ok(cp_leq_slack(f, g, tol)? >= -tol.eps_psd * g.choi().matrix.max_abs().max(1.0))
}

/// Smallest eigenvalue of `choi(g) - choi(f)`.
pub fn cp_leq_slack(f: &KrausMap, g: &KrausMap, tol: &Tolerance) -> Result<f64> {
    if (f.in_dim, f.out_dim) != (g.in_dim, g.out_dim) {
        return Err(Error::shape(
            format!("{}->{}", g.in_dim, g.out_dim),
            format!("{}->{}", f.in_dim, f.out_dim),
        ));
    }
    if f.is_zero() && g.is_zero() {
        return Ok(0.0);
    }
    (&g.choi().matrix - &f.choi().matrix).min_eigenvalue(tol)
}

/// `|tr(E*(s)·t) - tr(s·E(t))|` relative to `max(1, |lhs|, |rhs|)`.
pub fn duality_residual(k: &KrausMap, s: &CMatrix, t: &CMatrix) -> Result<f64> {
    let lhs = (&k.apply_heisenberg(s)? * t).trace();
    let rhs = (s * &k.apply_schrodinger(t)?).trace();
    Ok((lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0))
}

/// The trace pairing between the two pictures: `tr(E*(s)·t) = tr(s·E(t))`.
pub fn duality_check(k: &KrausMap, s: &CMatrix, t: &CMatrix, tol: &Tolerance) -> Result<bool> {
    Ok(duality_residual(k, s, t)? <= tol.eps_eq)
}
