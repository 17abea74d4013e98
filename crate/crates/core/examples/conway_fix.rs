//! The Conway fixed point of a random loop body `g: x → a ⊕ x` and its
//! unfolding equation `Fix(g) = [id, Fix(g)] ∘ g`.

use qpl::qcat::fix;
use qpl::{random, KleeneOptions, QArrow, Signature};

fn main() -> qpl::Result<()> {
    let mut rng = random::rng(5);
    let a = Signature::finite(vec![1, 2])?;
    let x = Signature::finite(vec![2])?;
    let g = random::arrow(&x, &Signature::direct_sum(&a, &x), 0.6, 0.9, &mut rng);

    let fixed = fix(&g, &a, &x, &KleeneOptions::default())?;
    let info = fixed.stats.snapshot();
    println!("Fix(g): {} -> {}, {} iterations, residual {:e}", x, a, info.iterations, info.residual);

    let unfolded = QArrow::compose(&QArrow::copair(&QArrow::identity(&a), &fixed.arrow)?, &g)?;
    println!("unfolding distance {:e}", fixed.arrow.max_choi_distance(&unfolded)?);
    Ok(())
}
