use super::QArrow;
use crate::cpmap::KrausMap;
use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance};
use crate::signature::Signature;

/// `(qbit, ι, p)`: `ι: bit → qbit` prepares `|0⟩` or `|1⟩` according to the
/// classical bit, `p: qbit → bit` measures in the computational basis.
/// `p ∘ ι = id_bit`, while `ι ∘ p` is the dephasing channel.
pub fn qbit_structure() -> (Signature, QArrow, QArrow) {
    let (bit, qbit) = (Signature::bit(), Signature::qbit());
    let ket = |i| KrausMap::new(1, 2, vec![CMatrix::ket(2, i)]).unwrap();
    let bra = |i| KrausMap::new(2, 1, vec![CMatrix::ket(2, i).adjoint()]).unwrap();
    let iota = QArrow::from_blocks_unchecked(bit.clone(), qbit.clone(), vec![vec![ket(0), ket(1)]])
        .unwrap();
    let p = QArrow::from_blocks_unchecked(qbit.clone(), bit, vec![vec![bra(0)], vec![bra(1)]])
        .unwrap();
    (qbit, iota, p)
}

/// `ι ∘ p`.
pub fn dephasing() -> QArrow {
    let (_, iota, p) = qbit_structure();
    QArrow::compose(&iota, &p).unwrap()
}

/// The trace `qbit → 1`.
pub fn discard_qbit() -> QArrow {
    let bras = (0..2).map(|i| CMatrix::ket(2, i).adjoint()).collect();
    let m = KrausMap::new(2, 1, bras).unwrap();
    QArrow::from_blocks_unchecked(Signature::qbit(), Signature::unit(), vec![vec![m]]).unwrap()
}

/// `ρ ↦ UρU†` on `qbit^{⊗k}`, for a `2^k x 2^k` unitary.
pub fn unitary_lift(u: &CMatrix, tol: &Tolerance) -> Result<QArrow> {
    let n = u.rows();
    if !u.is_square() {
        return Err(Error::NotSquare {
            rows: u.rows(),
            cols: u.cols(),
        });
    }
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Invalid(format!("gate dimension {n} is not a power of two")));
    }
    let residual = (&(&u.adjoint() * u) - &CMatrix::identity(n)).max_abs();
    if residual > tol.eps_eq.max(1e-9) {
        return Err(Error::NotUnitary { residual });
    }
    let k = n.trailing_zeros() as usize;
    let sig = Signature::tensor_all(&vec![Signature::qbit(); k]);
    QArrow::from_blocks_unchecked(sig.clone(), sig, vec![vec![KrausMap::conjugation(u.clone())?]])
}
