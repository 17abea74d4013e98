//! The Schrödinger and Heisenberg pictures of a random arrow agree on the
//! pairing `tr(E(S)·T) = tr(S·E_*(T))`.

use qpl::random;

fn main() -> qpl::Result<()> {
    let mut rng = random::rng(42);
    let s = random::signature(3, 3, &mut rng);
    let t = random::signature(3, 3, &mut rng);
    let f = random::arrow(&s, &t, 0.2, 1.0, &mut rng);
    let dual = f.dualize()?;
    println!("f: {s} -> {t}; f*: {} -> {}", dual.source(), dual.target());
    println!("subunital: {}", dual.is_subunital(&qpl::Tolerance::default())?);

    for _ in 0..5 {
        let state = random::state(&s, 1.0, &mut rng);
        let effect = random::effect_vector(&t, &mut rng);
        let forward = effect.pair(&state.apply(&f)?)?;
        let backward = dual.apply(&effect)?.pair(&state)?;
        println!("{forward:.12} {backward:.12} residual {:e}", (forward - backward).abs());
    }
    Ok(())
}
