use serde::{Deserialize, Serialize};

use super::QArrow;
use crate::cpmap::{ChoiMatrix, KrausMap};
use crate::error::{Error, Result};
use crate::matrix::{loewner_leq, CMatrix, Tolerance};
use crate::signature::Signature;

/// Iteration record of a fixed-point computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInfo {
    /// Largest iteration count over the evaluated columns.
    pub iterations: usize,
    pub converged: bool,
    /// Last successive-iterate difference (or remaining loop weight).
    pub residual: f64,
    /// Columns evaluated.
    pub columns: usize,
    /// Largest number of distinct loop states visited by one column.
    pub visited_keys: usize,
}

impl Default for ConvergenceInfo {
    fn default() -> Self {
        ConvergenceInfo {
            iterations: 0,
            converged: true,
            residual: 0.0,
            columns: 0,
            visited_keys: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDump {
    pub row: usize,
    pub col: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub choi: CMatrix,
}

/// Serialized form of a finite arrow: its endpoints and the Choi matrix of
/// every nonzero block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrowDump {
    pub source: Signature,
    pub target: Signature,
    pub picture: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceInfo>,
    pub blocks: Vec<BlockDump>,
}

/// Findings of [`ArrowDump::check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub ok: bool,
    pub issues: Vec<String>,
    /// Smallest Choi eigenvalue seen over all blocks.
    pub min_choi_eigenvalue: f64,
}

impl QArrow {
    pub fn to_dump(&self, convergence: Option<ConvergenceInfo>) -> Result<ArrowDump> {
        let keys = self
            .source()
            .keys()
            .ok_or_else(|| Error::Unsupported("dump of an arrow out of nat".into()))?;
        let mut blocks = Vec::new();
        for (col, j) in keys.iter().enumerate() {
            for (i, m) in self.column(j).iter() {
                let row = self.target().flat_index(i).ok_or_else(|| {
                    Error::Unsupported("dump of an arrow into nat".into())
                })?;
                blocks.push(BlockDump {
                    row,
                    col,
                    in_dim: m.in_dim(),
                    out_dim: m.out_dim(),
                    choi: m.choi().matrix.clone(),
                });
            }
        }
        Ok(ArrowDump {
            source: self.source().clone(),
            target: self.target().clone(),
            picture: "schrodinger".into(),
            convergence,
            blocks,
        })
    }
}

impl ArrowDump {
    /// Checks shapes, complete positivity of each block and the
    /// trace-nonincreasing condition of each column.
    pub fn check(&self, tol: &Tolerance) -> Result<CheckReport> {
        let (Some(sb), Some(tb)) = (self.source.blocks(), self.target.blocks()) else {
            return Err(Error::Unsupported("dumps of non-finite signatures".into()));
        };
        let mut issues = Vec::new();
        let mut min_eig = f64::INFINITY;
        let mut unit: Vec<CMatrix> = sb.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for b in &self.blocks {
            if b.col >= sb.len() || b.row >= tb.len() {
                issues.push(format!("block ({},{}) is out of range", b.row, b.col));
                continue;
            }
            if (b.in_dim, b.out_dim) != (sb[b.col], tb[b.row]) {
                issues.push(format!("block ({},{}) has dimensions {}->{}", b.row, b.col, b.in_dim, b.out_dim));
                continue;
            }
            let choi = match ChoiMatrix::new(b.in_dim, b.out_dim, b.choi.clone()) {
                Ok(c) => c,
                Err(e) => {
                    issues.push(format!("block ({},{}): {e}", b.row, b.col));
                    continue;
                }
            };
            match choi.matrix.min_eigenvalue(tol) {
                Ok(ev) => {
                    min_eig = min_eig.min(ev);
                    if !choi.is_cp(tol)? {
                        issues.push(format!(
                            "block ({},{}) is not completely positive (min Choi eigenvalue {ev:.3e})",
                            b.row, b.col
                        ));
                    }
                }
                Err(e) => issues.push(format!("block ({},{}): {e}", b.row, b.col)),
            }
            unit[b.col] = &unit[b.col] + &choi.heisenberg_unit_image();
        }
        for (j, u) in unit.iter().enumerate() {
            if !loewner_leq(u, &CMatrix::identity(sb[j]), tol).unwrap_or(false) {
                issues.push(format!("column {j} is not trace-nonincreasing"));
            }
        }
        Ok(CheckReport {
            ok: issues.is_empty(),
            issues,
            min_choi_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        })
    }

    /// Rebuilds the arrow; every block must be completely positive.
    pub fn to_arrow(&self, tol: &Tolerance) -> Result<QArrow> {
        let (Some(sb), Some(tb)) = (self.source.blocks(), self.target.blocks()) else {
            return Err(Error::Unsupported("dumps of non-finite signatures".into()));
        };
        let mut dense: Vec<Vec<KrausMap>> = tb
            .iter()
            .map(|&m| sb.iter().map(|&n| KrausMap::zero(n, m)).collect())
            .collect();
        for b in &self.blocks {
            if b.col >= sb.len() || b.row >= tb.len() {
                return Err(Error::Invalid(format!("block ({},{}) is out of range", b.row, b.col)));
            }
            let choi = ChoiMatrix::new(b.in_dim, b.out_dim, b.choi.clone())?;
            let m = KrausMap::from_choi(&choi, tol)?;
            dense[b.row][b.col] = dense[b.row][b.col].sum(&m)?;
        }
        QArrow::from_blocks(self.source.clone(), self.target.clone(), dense, tol)
    }
}
