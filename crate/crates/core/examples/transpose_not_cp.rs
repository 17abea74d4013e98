//! The transpose map is positive but not completely positive: its Choi matrix
//! (the swap) has eigenvalue -1.

use qpl::{ChoiMatrix, Tolerance};

fn main() -> qpl::Result<()> {
    let tol = Tolerance::default();
    for n in 2..=3 {
        let choi = ChoiMatrix::transpose_map(n);
        println!(
            "n = {n}: completely positive {}, eigenvalues {:?}",
            choi.is_cp(&tol)?,
            choi.matrix.hermitian_eigenvalues(&tol)?
        );
    }
    Ok(())
}
