use std::collections::BTreeMap;

use super::{EffectVector, QArrow};
use crate::cpmap::KrausMap;
use crate::error::{Error, Result};
use crate::matrix::{loewner_leq, CMatrix, Tolerance};
use crate::signature::{BlockKey, Signature};

/// The Heisenberg presentation of a finite arrow: a normal subunital CP map
/// between the opposite algebras, `target(f) → source(f)` on observables.
#[derive(Debug, Clone)]
pub struct WstarArrow {
    source: Signature,
    target: Signature,
    /// `blocks[j][i]` maps observables on block `i` of `source` to block `j` of `target`.
    blocks: Vec<Vec<KrausMap>>,
}

impl QArrow {
    /// The equivalent W*-morphism (finite arrows only).
    pub fn dualize(&self) -> Result<WstarArrow> {
        let dense = self.blocks()?;
        let (rows, cols) = (dense.len(), self.source().num_blocks().unwrap());
        let blocks = (0..cols)
            .map(|j| (0..rows).map(|i| dense[i][j].dual()).collect())
            .collect();
        Ok(WstarArrow {
            source: self.target().clone(),
            target: self.source().clone(),
            blocks,
        })
    }
}

impl WstarArrow {
    pub fn source(&self) -> &Signature {
        &self.source
    }

    pub fn target(&self) -> &Signature {
        &self.target
    }

    /// Block `[j][i]` as a Kraus map in the Heisenberg direction.
    pub fn blocks(&self) -> &[Vec<KrausMap>] {
        &self.blocks
    }

    /// Back to the Schrödinger presentation.
    pub fn dualize(&self) -> Result<QArrow> {
        let rows = self.blocks.first().map_or(0, Vec::len);
        let dense = (0..rows)
            .map(|i| self.blocks.iter().map(|row| row[i].dual()).collect())
            .collect();
        QArrow::from_blocks_unchecked(self.target.clone(), self.source.clone(), dense)
    }

    /// Action on an effect of `source`.
    pub fn apply(&self, effect: &EffectVector) -> Result<EffectVector> {
        if effect.signature != self.source {
            return Err(Error::SignatureMismatch("effect signature".into()));
        }
        let dims = self.target.blocks().unwrap_or(&[]);
        let mut parts = BTreeMap::new();
        for (j, (row, &n)) in self.blocks.iter().zip(dims).enumerate() {
            let mut acc = CMatrix::zeros(n, n);
            for (i, m) in row.iter().enumerate() {
                if let Some(q) = effect.parts.get(&BlockKey::flat(i)) {
                    acc = &acc + &m.apply_schrodinger(q)?;
                }
            }
            if !acc.is_zero() {
                parts.insert(BlockKey::flat(j), acc);
            }
        }
        Ok(EffectVector {
            signature: self.target.clone(),
            parts,
        })
    }

    /// Image of the unit, one block per target summand.
    pub fn unit_image(&self) -> Vec<CMatrix> {
        let dims = self.target.blocks().unwrap_or(&[]);
        self.blocks
            .iter()
            .zip(dims)
            .map(|(row, &n)| {
                row.iter().fold(CMatrix::zeros(n, n), |acc, m| {
                    &acc + &m.dual().heisenberg_unit_image()
                })
            })
            .collect()
    }

    pub fn is_subunital(&self, tol: &Tolerance) -> Result<bool> {
        for u in self.unit_image() {
            if !loewner_leq(&u, &CMatrix::identity(u.rows()), tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_unital(&self, tol: &Tolerance) -> bool {
        self.unit_image()
            .iter()
            .all(|u| u.max_abs_diff(&CMatrix::identity(u.rows())) <= tol.eps_eq)
    }
}
