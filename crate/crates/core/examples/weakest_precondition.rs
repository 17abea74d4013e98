//! Weakest preconditions: the Heisenberg image of a post-effect under a
//! program's denotation.

use qpl::frontend::{compile, DenoteOptions, GateTable};
use qpl::{BlockKey, EffectVector, Signature};

fn main() -> qpl::Result<()> {
    let src = "input (q: qbit); q *= H(q); measure q then {} else {}";
    let d = compile(src, &GateTable::default(), &DenoteOptions::default())?;
    for outcome in 0..2 {
        let post = EffectVector::indicator(&Signature::bit(), BlockKey::flat(outcome))?;
        let pre = d.wp(&post)?;
        println!("wp(outcome {outcome}) =\n{:?}", pre.parts[&BlockKey::flat(0)]);
    }
    Ok(())
}
