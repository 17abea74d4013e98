//! Functions between finite sets as deterministic arrows between commutative
//! algebras, and the classical builtins of the language.

use qpl::classical::{builtin, ell_infty_arrow, faithfulness_witness, ClassicalFn, FinSet};
use qpl::{BlockKey, QArrow};

fn main() -> qpl::Result<()> {
    let s = FinSet::new(["a", "b", "c"])?;
    let t = FinSet::range(2);
    let f = ClassicalFn::new(s.clone(), t.clone(), vec![0, 1, 1])?;
    let g = ClassicalFn::new(s.clone(), t.clone(), vec![0, 1, 0])?;

    let af = ell_infty_arrow(&f);
    println!("ell(f): {} -> {}", af.source(), af.target());
    for j in 0..s.len() {
        let col = af.column(&BlockKey::flat(j));
        println!("  point mass at {} goes to block {}", s.label(j), col[0].0);
    }
    if let Some(w) = faithfulness_witness(&f, &g)? {
        println!("f and g differ at {}", s.label(w));
    }

    let not = ClassicalFn::from_fn(t.clone(), t.clone(), |i| 1 - i)?;
    let composed = ClassicalFn::compose(&not, &f)?;
    let lhs = ell_infty_arrow(&composed);
    let rhs = QArrow::compose(&ell_infty_arrow(&not), &af)?;
    println!("functoriality: distance {}", lhs.max_choi_distance(&rhs)?);

    let add = builtin("add").unwrap();
    println!("{add:?}, add(2, 3) = {}", add.eval(&[2, 3]));
    let col = add.arrow().column(&BlockKey { term: 0, idx: vec![2, 3] });
    println!("its arrow sends (2, 3) to block {}", col[0].0);
    Ok(())
}
