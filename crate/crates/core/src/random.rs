//! Seeded generators for random states, effects, channels and arrows.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cpmap::KrausMap;
use crate::matrix::{CMatrix, Tolerance, C64};
use crate::qcat::{EffectVector, QArrow, StateVector};
use crate::signature::{BlockKey, Signature};

pub use rand_chacha::ChaCha8Rng as Rng8;
pub use rand::SeedableRng;

pub fn rng(seed: u64) -> Rng8 {
    Rng8::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) / 2f64.sqrt()
    })
}

pub fn hermitian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    (&g + &g.adjoint()).scale(0.5)
}

/// Haar-random unitary (QR of a Ginibre matrix with the phases of `R` removed).
pub fn unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(n, n, rng).as_nalgebra().clone().qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    CMatrix::from_nalgebra(q)
}

/// Random density matrix of trace `weight`.
pub fn density<R: Rng>(n: usize, weight: f64, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    let rho = &g * &g.adjoint();
    let t = rho.trace().re;
    rho.scale(weight / t)
}

/// Random effect `0 <= q <= 1`.
pub fn effect<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let u = unitary(n, rng);
    let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    &(&u * &CMatrix::diag(&d)) * &u.adjoint()
}

/// `S^{-1/2}` for a positive definite `S`.
fn inverse_sqrt(s: &CMatrix) -> CMatrix {
    let (vals, vecs) = s
        .hermitian_eigen(&Tolerance::uniform(1e-6))
        .expect("Hermitian input");
    let d: Vec<f64> = vals.iter().map(|&v| 1.0 / v.max(1e-300).sqrt()).collect();
    &(&vecs * &CMatrix::diag(&d)) * &vecs.adjoint()
}

/// Random trace-nonincreasing arrow `s → t` between finite signatures. Each
/// column is rescaled so that `Σ_i f_ij*(1) = c_j · I` with `c_j` drawn
/// uniformly from `[lo, hi] ⊆ [0, 1]`; about a third of the blocks are zero.
pub fn arrow<R: Rng>(s: &Signature, t: &Signature, lo: f64, hi: f64, rng: &mut R) -> QArrow {
    let sb = s.blocks().expect("finite source").to_vec();
    let tb = t.blocks().expect("finite target").to_vec();
    let mut dense: Vec<Vec<KrausMap>> = tb
        .iter()
        .map(|&m| sb.iter().map(|&n| KrausMap::zero(n, m)).collect())
        .collect();
    for (j, &n) in sb.iter().enumerate() {
        let mut raw: Vec<(usize, Vec<CMatrix>)> = Vec::new();
        for (i, &m) in tb.iter().enumerate() {
            if tb.len() > 1 && rng.random::<f64>() < 0.33 {
                continue;
            }
            let count = rng.random_range(1..=(n * m).clamp(1, 3));
            raw.push((i, (0..count).map(|_| ginibre(m, n, rng)).collect()));
        }
        if raw.is_empty() {
            continue;
        }
        // enough rows for Σ A†A to be invertible
        let mut rows: usize = raw.iter().map(|(i, ks)| tb[*i] * ks.len()).sum();
        while rows < n {
            let e = rng.random_range(0..raw.len());
            let m = tb[raw[e].0];
            raw[e].1.push(ginibre(m, n, rng));
            rows += m;
        }
        let total = raw.iter().flat_map(|(_, ks)| ks).fold(CMatrix::zeros(n, n), |acc, a| {
            &acc + &(&a.adjoint() * a)
        });
        let c = lo + (hi - lo) * rng.random::<f64>();
        let norm = inverse_sqrt(&total).scale(c.sqrt());
        for (i, ks) in raw {
            let ks = ks.iter().map(|a| a * &norm).collect();
            dense[i][j] = KrausMap::new(n, tb[i], ks).unwrap();
        }
    }
    QArrow::from_blocks(s.clone(), t.clone(), dense, &Tolerance::uniform(1e-7))
        .expect("normalized columns are trace-nonincreasing")
}

/// Random finite signature with at most `max_blocks` blocks of dimension at most `max_dim`.
pub fn signature<R: Rng>(max_blocks: usize, max_dim: usize, rng: &mut R) -> Signature {
    let k = rng.random_range(1..=max_blocks);
    Signature::finite((0..k).map(|_| rng.random_range(1..=max_dim)).collect()).unwrap()
}

/// Random state with total weight `weight`, spread over all blocks.
pub fn state<R: Rng>(s: &Signature, weight: f64, rng: &mut R) -> StateVector {
    let dims = s.blocks().expect("finite signature");
    let w: Vec<f64> = dims.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let parts = dims
        .iter()
        .enumerate()
        .map(|(k, &n)| (BlockKey::flat(k), density(n, weight * w[k] / total, rng)))
        .collect();
    StateVector::new(s.clone(), parts, &Tolerance::uniform(1e-7)).unwrap()
}

pub fn effect_vector<R: Rng>(s: &Signature, rng: &mut R) -> EffectVector {
    let dims = s.blocks().expect("finite signature");
    let parts = dims
        .iter()
        .enumerate()
        .map(|(k, &n)| (BlockKey::flat(k), effect(n, rng)))
        .collect();
    EffectVector::new(s.clone(), parts, &Tolerance::uniform(1e-7)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_objects_satisfy_their_invariants() {
        let tol = Tolerance::uniform(1e-8);
        let mut r = rng(7);
        for _ in 0..20 {
            let u = unitary(3, &mut r);
            assert!((&(&u.adjoint() * &u) - &CMatrix::identity(3)).max_abs() < 1e-12);
            assert!(effect(3, &mut r).is_effect(&tol).unwrap());
            let rho = density(2, 0.4, &mut r);
            assert!(rho.is_psd(&tol).unwrap());
            assert!((rho.trace().re - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn arrows_hit_the_requested_column_weight() {
        let tol = Tolerance::uniform(1e-8);
        let mut r = rng(3);
        let s = Signature::finite(vec![2, 1]).unwrap();
        let t = Signature::finite(vec![1, 3]).unwrap();
        let f = arrow(&s, &t, 1.0, 1.0, &mut r);
        assert!(f.is_trace_preserving(&tol).unwrap());
        let g = arrow(&s, &t, 0.2, 0.5, &mut r);
        assert!(g.is_trace_nonincreasing(&tol).unwrap());
        assert!(!g.is_trace_preserving(&tol).unwrap());
    }
}
