//! A loop over a `nat` counter. Columns of arrows out of `nat` are computed on
//! demand, so running from a given start value only evaluates that column.

use qpl::frontend::{compile, programs, DenoteOptions, GateTable};
use qpl::{BlockKey, CMatrix, StateVector, Tolerance};

fn main() -> qpl::Result<()> {
    let src = programs::COIN.replace("new nat n;", "input (n: nat);");
    let d = compile(&src, &GateTable::default(), &DenoteOptions::default())?;
    println!("{} -> {}", d.input(), d.output());

    let start = StateVector::single(&d.input().signature(), BlockKey::flat(10), CMatrix::identity(1), &Tolerance::default())?;
    let out = d.run(&start)?;
    for (k, m) in out.parts.iter().take(6) {
        println!("n = {k}: {:.6}", m.trace().re);
    }
    println!("support size {}, total weight {:.9}", out.parts.len(), out.total_weight());
    println!("materialized columns: {:?}", d.arrow.materialized_columns());
    for (label, info) in d.convergence() {
        println!("{label}: {} iterations, {} loop states", info.iterations, info.visited_keys);
    }
    Ok(())
}
