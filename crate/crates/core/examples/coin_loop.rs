//! The trace of a loop that flips a fair coin until it comes up heads, as a
//! Kleene chain of approximants.

use qpl::qcat::{trace, TraceIter};
use qpl::{CMatrix, KleeneOptions, KrausMap, QArrow, Signature, Tolerance, C64};

fn main() -> qpl::Result<()> {
    let one = Signature::unit();
    let two = Signature::direct_sum(&one, &one);
    let half = || KrausMap::new(1, 1, vec![CMatrix::scalar(C64::new(0.5f64.sqrt(), 0.0))]).unwrap();
    // exit or go round again, each with probability 1/2
    let body = QArrow::from_blocks(two.clone(), two, vec![vec![half(), half()], vec![half(), half()]], &Tolerance::default())?;

    let mut it = TraceIter::new(&body, &one, &one, &one)?;
    for _ in 0..8 {
        it.step()?;
        let w = it.approximant()?.block(0, 0)?.choi().matrix.get(0, 0).re;
        println!("T_{}: termination weight {w:.6}", it.index());
    }

    let tr = trace(&body, &one, &one, &one, &KleeneOptions::default())?;
    let w = tr.arrow.block(0, 0)?.choi().matrix.get(0, 0).re;
    println!("limit {w:.12} after {} iterations (converged: {})", tr.iterations(), tr.converged());
    Ok(())
}
