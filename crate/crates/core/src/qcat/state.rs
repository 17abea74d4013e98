use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::QArrow;
use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance};
use crate::signature::{BlockKey, Signature};

/// A (sub)normalized state: one positive block per occupied summand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub signature: Signature,
    pub parts: BTreeMap<BlockKey, CMatrix>,
}

/// An effect: one block `0 <= q_k <= 1` per summand; missing blocks are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectVector {
    pub signature: Signature,
    pub parts: BTreeMap<BlockKey, CMatrix>,
}

fn check_block(sig: &Signature, key: &BlockKey, m: &CMatrix) -> Result<()> {
    let d = sig.block_dim(key)?;
    if m.shape() != (d, d) {
        return Err(Error::shape(format!("{d}x{d} block at {key}"), format!("{:?}", m.shape())));
    }
    Ok(())
}

impl StateVector {
    /// Validates shapes, positivity and total weight `<= 1`.
    pub fn new(
        signature: Signature,
        parts: BTreeMap<BlockKey, CMatrix>,
        tol: &Tolerance,
    ) -> Result<Self> {
        for (k, m) in &parts {
            check_block(&signature, k, m)?;
            if !m.is_psd(tol)? {
                return Err(Error::Invalid(format!("block {k} is not positive")));
            }
        }
        let s = StateVector { signature, parts };
        if s.total_weight() > 1.0 + tol.eps_eq {
            return Err(Error::Invalid(format!(
                "total weight {} exceeds 1",
                s.total_weight()
            )));
        }
        Ok(s)
    }

    /// The state concentrated on block `key` with density matrix `rho`.
    pub fn single(signature: &Signature, key: BlockKey, rho: CMatrix, tol: &Tolerance) -> Result<Self> {
        StateVector::new(signature.clone(), BTreeMap::from([(key, rho)]), tol)
    }

    /// A classical distribution on a finite signature of 1x1 blocks.
    pub fn distribution(signature: &Signature, weights: &[f64], tol: &Tolerance) -> Result<Self> {
        let parts = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (BlockKey::flat(i), CMatrix::diag(&[w])))
            .collect();
        StateVector::new(signature.clone(), parts, tol)
    }

    pub fn total_weight(&self) -> f64 {
        self.parts.values().map(|m| m.trace().re).sum()
    }

    pub fn part(&self, key: &BlockKey) -> Option<&CMatrix> {
        self.parts.get(key)
    }

    /// Weight `tr ρ_k` of one block.
    pub fn weight(&self, key: &BlockKey) -> f64 {
        self.parts.get(key).map_or(0.0, |m| m.trace().re)
    }

    /// Schrödinger action of `f` on this state.
    pub fn apply(&self, f: &QArrow) -> Result<StateVector> {
        if *f.source() != self.signature {
            return Err(Error::SignatureMismatch(format!(
                "state on {} fed to arrow out of {}",
                self.signature,
                f.source()
            )));
        }
        let mut out: BTreeMap<BlockKey, CMatrix> = BTreeMap::new();
        for (j, rho) in &self.parts {
            for (i, fij) in f.column(j).iter() {
                let img = fij.apply_schrodinger(rho)?;
                match out.get_mut(i) {
                    Some(acc) => *acc = &*acc + &img,
                    None => {
                        out.insert(i.clone(), img);
                    }
                }
            }
        }
        out.retain(|_, m| !m.is_zero());
        Ok(StateVector {
            signature: f.target().clone(),
            parts: out,
        })
    }
}

impl EffectVector {
    pub fn new(
        signature: Signature,
        parts: BTreeMap<BlockKey, CMatrix>,
        tol: &Tolerance,
    ) -> Result<Self> {
        for (k, m) in &parts {
            check_block(&signature, k, m)?;
            if !m.is_effect(tol)? {
                return Err(Error::Invalid(format!("block {k} is not an effect")));
            }
        }
        Ok(EffectVector { signature, parts })
    }

    /// The unit effect of a finite signature.
    pub fn ones(signature: &Signature) -> Result<Self> {
        let keys = signature
            .keys()
            .ok_or_else(|| Error::Unsupported("unit effect on a non-finite signature".into()))?;
        let parts = keys
            .into_iter()
            .map(|k| {
                let d = signature.block_dim(&k).unwrap();
                (k, CMatrix::identity(d))
            })
            .collect();
        Ok(EffectVector {
            signature: signature.clone(),
            parts,
        })
    }

    /// The projection onto one block.
    pub fn indicator(signature: &Signature, key: BlockKey) -> Result<Self> {
        let d = signature.block_dim(&key)?;
        Ok(EffectVector {
            signature: signature.clone(),
            parts: BTreeMap::from([(key, CMatrix::identity(d))]),
        })
    }

    /// `Σ_k tr(q_k ρ_k)`.
    pub fn pair(&self, state: &StateVector) -> Result<f64> {
        if self.signature != state.signature {
            return Err(Error::SignatureMismatch("effect and state live on different signatures".into()));
        }
        Ok(state
            .parts
            .iter()
            .filter_map(|(k, rho)| self.parts.get(k).map(|q| (q * rho).trace().re))
            .sum())
    }

    /// Weakest precondition: the Heisenberg action of `f` (finite source).
    pub fn wp(&self, f: &QArrow) -> Result<EffectVector> {
        if *f.target() != self.signature {
            return Err(Error::SignatureMismatch(format!(
                "effect on {} pulled back along arrow into {}",
                self.signature,
                f.target()
            )));
        }
        let keys = f
            .source()
            .keys()
            .ok_or_else(|| Error::Unsupported("wp over a non-finite source".into()))?;
        let mut parts = BTreeMap::new();
        for j in keys {
            let n = f.source().block_dim(&j)?;
            let mut acc = CMatrix::zeros(n, n);
            for (i, fij) in f.column(&j).iter() {
                if let Some(q) = self.parts.get(i) {
                    acc = &acc + &fij.apply_heisenberg(q)?;
                }
            }
            if !acc.is_zero() {
                parts.insert(j, acc);
            }
        }
        Ok(EffectVector {
            signature: f.source().clone(),
            parts,
        })
    }
}
