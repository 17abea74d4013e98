//! Kraus and Choi presentations of a qbit channel.

use qpl::cpmap::kraus_to_choi;
use qpl::{CMatrix, KrausMap, Tolerance};

fn main() -> qpl::Result<()> {
    let tol = Tolerance::default();
    // amplitude damping with decay probability 0.3
    let g: f64 = 0.3;
    let k0 = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - g).sqrt()])?;
    let k1 = CMatrix::from_real(2, 2, &[0.0, g.sqrt(), 0.0, 0.0])?;
    let damp = KrausMap::new(2, 2, vec![k0, k1])?;
    println!("trace preserving: {}", damp.is_trace_preserving(&tol));

    let choi = kraus_to_choi(&damp);
    println!("Choi matrix:\n{:?}", choi.matrix);
    let back = KrausMap::from_choi(&choi, &tol)?;
    println!("{} Kraus operators recovered, distance {:e}", back.kraus().len(), back.choi_distance(&damp)?);

    let excited = CMatrix::diag(&[0.0, 1.0]);
    println!("damped |1><1|:\n{:?}", damp.apply_schrodinger(&excited)?);
    Ok(())
}
