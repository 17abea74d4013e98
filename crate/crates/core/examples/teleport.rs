//! Compiles the bundled teleportation program and compares it with the
//! identity channel on one qbit.

use qpl::frontend::{compile, programs, DenoteOptions, GateTable};
use qpl::{random, QArrow, Signature};

fn main() -> qpl::Result<()> {
    let d = compile(programs::TELEPORT, &GateTable::default(), &DenoteOptions::default())?;
    println!("{} -> {}", d.input(), d.output());
    let dist = d.arrow.max_choi_distance(&QArrow::identity(&Signature::qbit()))?;
    println!("distance to the identity: {dist:e}");

    let mut rng = random::rng(1);
    let rho = random::state(&Signature::qbit(), 1.0, &mut rng);
    let out = d.run(&rho)?;
    println!("in:  {:?}\nout: {:?}", rho.parts.values().next().unwrap(), out.parts.values().next().unwrap());
    Ok(())
}
