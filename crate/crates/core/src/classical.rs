//! Classical data inside the category: finite sets become commutative
//! signatures `ℓ∞(S) = ℂ^S`, functions become deterministic arrows, and `nat`
//! carries lazily evaluated built-in functions.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::cpmap::KrausMap;
use crate::error::{Error, Result};
use crate::qcat::{QArrow, TensorFold};
use crate::signature::{BlockKey, BlockPermutation, Signature};

/// A finite set with labelled, ordered elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinSet {
    elements: Vec<String>,
}

impl FinSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let elements: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        if let Some(dup) = elements.iter().find(|e| !seen.insert(e.as_str())) {
            return Err(Error::Invalid(format!("duplicate element {dup:?}")));
        }
        Ok(FinSet { elements })
    }

    /// `{0, 1, ..., n-1}`.
    pub fn range(n: usize) -> Self {
        FinSet {
            elements: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == label)
    }

    /// `S × T` in lexicographic order, labelled `(s,t)`.
    pub fn product(s: &FinSet, t: &FinSet) -> FinSet {
        FinSet {
            elements: s
                .elements
                .iter()
                .flat_map(|a| t.elements.iter().map(move |b| format!("({a},{b})")))
                .collect(),
        }
    }
}

/// A total function between finite sets, on indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalFn {
    pub domain: FinSet,
    pub codomain: FinSet,
    map: Vec<usize>,
}

impl ClassicalFn {
    pub fn new(domain: FinSet, codomain: FinSet, map: Vec<usize>) -> Result<Self> {
        if map.len() != domain.len() {
            return Err(Error::Invalid(format!(
                "function table has {} entries for a domain of size {}",
                map.len(),
                domain.len()
            )));
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= codomain.len()) {
            return Err(Error::Invalid(format!("index {bad} is outside the codomain")));
        }
        Ok(ClassicalFn {
            domain,
            codomain,
            map,
        })
    }

    pub fn from_fn(domain: FinSet, codomain: FinSet, f: impl Fn(usize) -> usize) -> Result<Self> {
        let map = (0..domain.len()).map(f).collect();
        ClassicalFn::new(domain, codomain, map)
    }

    pub fn identity(s: &FinSet) -> Self {
        ClassicalFn {
            domain: s.clone(),
            codomain: s.clone(),
            map: (0..s.len()).collect(),
        }
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn table(&self) -> &[usize] {
        &self.map
    }

    /// `g ∘ f`.
    pub fn compose(g: &ClassicalFn, f: &ClassicalFn) -> Result<Self> {
        if f.codomain != g.domain {
            return Err(Error::Invalid("function composition: sets differ".into()));
        }
        Ok(ClassicalFn {
            domain: f.domain.clone(),
            codomain: g.codomain.clone(),
            map: f.map.iter().map(|&j| g.map[j]).collect(),
        })
    }

    /// `f × g` on lexicographically ordered products.
    pub fn product(f: &ClassicalFn, g: &ClassicalFn) -> Self {
        let n = g.codomain.len();
        ClassicalFn {
            domain: FinSet::product(&f.domain, &g.domain),
            codomain: FinSet::product(&f.codomain, &g.codomain),
            map: f
                .map
                .iter()
                .flat_map(|&a| g.map.iter().map(move |&b| a * n + b))
                .collect(),
        }
    }
}

/// `ℓ∞(S)`: one 1x1 block per element.
pub fn ell_infty(s: &FinSet) -> Signature {
    Signature::classical(s.len())
}

/// The deterministic arrow `ℓ∞(S) → ℓ∞(T)` of `f`: a point mass at `j` is sent
/// to the point mass at `f(j)`. On observables it is precomposition `φ ↦ φ ∘ f`.
pub fn ell_infty_arrow(f: &ClassicalFn) -> QArrow {
    let map = f.map.clone();
    QArrow::relabel(&ell_infty(&f.domain), &ell_infty(&f.codomain), move |k| {
        BlockKey::flat(map[k.idx[0]])
    })
}

/// `ℓ∞(S) ⊗ ℓ∞(T) ≅ ℓ∞(S × T)`, `(i, j) ↦ |T|·i + j`.
pub fn product_iso(s: &FinSet, t: &FinSet) -> BlockPermutation {
    let source = Signature::tensor(&ell_infty(s), &ell_infty(t));
    let target = ell_infty(&FinSet::product(s, t));
    let map = (0..s.len() * t.len()).collect();
    BlockPermutation::new(source, target, map).expect("both sides have |S|·|T| scalar blocks")
}

/// An element on which `f` and `g` differ, detected through their arrows: the
/// point mass at `s` is sent to different blocks exactly when `f(s) ≠ g(s)`.
pub fn faithfulness_witness(f: &ClassicalFn, g: &ClassicalFn) -> Result<Option<usize>> {
    if f.domain != g.domain || f.codomain != g.codomain {
        return Err(Error::Invalid("functions have different types".into()));
    }
    let (af, ag) = (ell_infty_arrow(f), ell_infty_arrow(g));
    for s in 0..f.domain.len() {
        let k = BlockKey::flat(s);
        if af.column_distance(&ag, &k)? > 0.0 {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Type of a classical value: a finite set `{0..n-1}` or `ℕ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassicalType {
    Finite(usize),
    Nat,
}

impl ClassicalType {
    pub const BIT: ClassicalType = ClassicalType::Finite(2);

    pub fn signature(&self) -> Signature {
        match self {
            ClassicalType::Finite(n) => Signature::classical(*n),
            ClassicalType::Nat => Signature::nat(),
        }
    }

    fn contains(&self, v: usize) -> bool {
        match self {
            ClassicalType::Finite(n) => v < *n,
            ClassicalType::Nat => true,
        }
    }
}

impl fmt::Display for ClassicalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassicalType::Finite(2) => write!(f, "bit"),
            ClassicalType::Finite(n) => write!(f, "fin{n}"),
            ClassicalType::Nat => write!(f, "nat"),
        }
    }
}

/// Deterministic arrow `⊗ inputs → ⊗ outputs` computing `f` on values.
/// Columns are evaluated on demand, so `nat` arguments are allowed.
pub fn classical_arrow<F>(
    inputs: &[ClassicalType],
    outputs: &[ClassicalType],
    f: F,
) -> Result<QArrow>
where
    F: Fn(&[usize]) -> Vec<usize> + Send + Sync + 'static,
{
    let in_sigs: Vec<Signature> = inputs.iter().map(ClassicalType::signature).collect();
    let out_sigs: Vec<Signature> = outputs.iter().map(ClassicalType::signature).collect();
    let src = TensorFold::new(&in_sigs);
    let dst = TensorFold::new(&out_sigs);
    let outputs = outputs.to_vec();
    let (source, target) = (src.result.clone(), dst.result.clone());
    let arrow = QArrow::from_column_fn(source, target, move |k| {
        let args: Vec<usize> = src.split(k).iter().map(|p| p.idx[0]).collect();
        let vals = f(&args);
        assert!(
            vals.len() == outputs.len() && vals.iter().zip(&outputs).all(|(&v, t)| t.contains(v)),
            "classical function returned {vals:?} outside {outputs:?}"
        );
        let parts: Vec<BlockKey> = vals.into_iter().map(BlockKey::flat).collect();
        vec![(dst.join(&parts), KrausMap::identity(1))]
    });
    Ok(arrow)
}

/// A named classical function with a fixed type.
#[derive(Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub inputs: Vec<ClassicalType>,
    pub output: ClassicalType,
    eval: Arc<dyn Fn(&[usize]) -> usize + Send + Sync>,
}

impl fmt::Debug for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: (", self.name)?;
        for (i, t) in self.inputs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ") -> {}", self.output)
    }
}

impl Builtin {
    pub fn new(
        name: &'static str,
        inputs: Vec<ClassicalType>,
        output: ClassicalType,
        eval: impl Fn(&[usize]) -> usize + Send + Sync + 'static,
    ) -> Self {
        Builtin {
            name,
            inputs,
            output,
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, args: &[usize]) -> usize {
        (self.eval)(args)
    }

    /// The arrow `⊗ inputs → output`.
    pub fn arrow(&self) -> QArrow {
        let e = self.eval.clone();
        classical_arrow(&self.inputs, &[self.output], move |a| vec![e(a)])
            .expect("builtin types are well formed")
    }

    /// The arrow `⊗ inputs → (⊗ inputs) ⊗ output` that keeps its arguments.
    pub fn arrow_keeping_args(&self) -> QArrow {
        let e = self.eval.clone();
        let mut outs = self.inputs.clone();
        outs.push(self.output);
        classical_arrow(&self.inputs, &outs, move |a| {
            let mut v = a.to_vec();
            v.push(e(a));
            v
        })
        .expect("builtin types are well formed")
    }
}

/// The built-in classical functions available to programs.
pub fn builtins() -> Vec<Builtin> {
    use ClassicalType::Nat;
    const BIT: ClassicalType = ClassicalType::BIT;
    let b = |x: bool| usize::from(x);
    vec![
        Builtin::new("succ", vec![Nat], Nat, |a| a[0] + 1),
        Builtin::new("pred", vec![Nat], Nat, |a| a[0].saturating_sub(1)),
        Builtin::new("add", vec![Nat, Nat], Nat, |a| a[0] + a[1]),
        Builtin::new("iszero", vec![Nat], BIT, move |a| b(a[0] == 0)),
        Builtin::new("eq", vec![Nat, Nat], BIT, move |a| b(a[0] == a[1])),
        Builtin::new("not", vec![BIT], BIT, |a| 1 - a[0]),
        Builtin::new("and", vec![BIT, BIT], BIT, |a| a[0] & a[1]),
        Builtin::new("or", vec![BIT, BIT], BIT, |a| a[0] | a[1]),
        Builtin::new("xor", vec![BIT, BIT], BIT, |a| a[0] ^ a[1]),
    ]
}

pub fn builtin(name: &str) -> Option<Builtin> {
    builtins().into_iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Tolerance;
    use crate::qcat::StateVector;
    use std::collections::BTreeMap;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn weights(s: &StateVector) -> Vec<f64> {
        (0..s.signature.num_blocks().unwrap())
            .map(|i| s.weight(&BlockKey::flat(i)))
            .collect()
    }

    fn nat_point(n: usize) -> StateVector {
        StateVector::distribution(&Signature::nat(), &[], &tol())
            .map(|mut s| {
                s.parts.insert(BlockKey::flat(n), crate::matrix::CMatrix::diag(&[1.0]));
                s
            })
            .unwrap()
    }

    /// All functions `{0..n} → {0..m}`.
    fn all_functions(n: usize, m: usize) -> Vec<ClassicalFn> {
        let count = m.pow(n as u32);
        (0..count)
            .map(|mut c| {
                let map = (0..n)
                    .map(|_| {
                        let v = c % m;
                        c /= m;
                        v
                    })
                    .collect();
                ClassicalFn::new(FinSet::range(n), FinSet::range(m), map).unwrap()
            })
            .collect()
    }

    #[test]
    fn ell_infty_examples() {
        assert_eq!(ell_infty(&FinSet::range(2)), Signature::finite(vec![1, 1]).unwrap());
        assert_eq!(ell_infty(&FinSet::range(0)), Signature::zero());
        assert_eq!(ell_infty(&FinSet::range(3)).to_string(), "(1,1,1)");
        assert!(FinSet::new(["a", "b", "a"]).is_err());
    }

    #[test]
    fn ell_infty_arrow_examples() {
        let two = FinSet::range(2);
        let id = ell_infty_arrow(&ClassicalFn::identity(&two));
        assert_eq!(id.max_choi_distance(&QArrow::identity(&Signature::bit())).unwrap(), 0.0);

        let not = ClassicalFn::new(two.clone(), two.clone(), vec![1, 0]).unwrap();
        let s = StateVector::distribution(&Signature::bit(), &[0.3, 0.7], &tol()).unwrap();
        assert_eq!(weights(&s.apply(&ell_infty_arrow(&not)).unwrap()), vec![0.7, 0.3]);

        let constant = ClassicalFn::new(two, FinSet::range(1), vec![0, 0]).unwrap();
        let out = s.apply(&ell_infty_arrow(&constant)).unwrap();
        assert!((weights(&out)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn functor_laws_exhaustive() {
        let t = Tolerance::default();
        for n in 0..=3 {
            for m in 1..=3 {
                for f in all_functions(n, m) {
                    let af = ell_infty_arrow(&f);
                    assert!(af.is_trace_preserving(&t).unwrap());
                    assert!(af.dualize().unwrap().is_unital(&t));
                    for k in 1..=3 {
                        for g in all_functions(m, k) {
                            let gf = ClassicalFn::compose(&g, &f).unwrap();
                            let lhs = ell_infty_arrow(&gf);
                            let rhs = QArrow::compose(&ell_infty_arrow(&g), &af).unwrap();
                            assert_eq!(lhs.max_choi_distance(&rhs).unwrap(), 0.0);
                        }
                    }
                }
            }
        }
        let four = FinSet::range(4);
        let id = ell_infty_arrow(&ClassicalFn::identity(&four));
        assert_eq!(id.max_choi_distance(&QArrow::identity(&ell_infty(&four))).unwrap(), 0.0);
    }

    #[test]
    fn product_iso_examples() {
        let p = product_iso(&FinSet::range(2), &FinSet::range(3));
        assert_eq!(p.map.len(), 6);
        assert!(p.is_identity());
        let e = product_iso(&FinSet::range(0), &FinSet::range(3));
        assert!(e.map.is_empty());
    }

    #[test]
    fn product_iso_is_natural() {
        for f in all_functions(2, 2) {
            for g in all_functions(3, 3).into_iter().step_by(4) {
                let iso = product_iso(&f.domain, &g.domain);
                let iso_t = product_iso(&f.codomain, &g.codomain);
                let lhs = QArrow::chain(&[
                    QArrow::from_permutation(&iso),
                    ell_infty_arrow(&ClassicalFn::product(&f, &g)),
                    QArrow::from_permutation(&iso_t.inverse()),
                ])
                .unwrap();
                let rhs = QArrow::tensor(&ell_infty_arrow(&f), &ell_infty_arrow(&g));
                assert_eq!(lhs.max_choi_distance(&rhs).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn faithfulness_exhaustive() {
        let two = FinSet::range(2);
        let id = ClassicalFn::identity(&two);
        let not = ClassicalFn::new(two.clone(), two, vec![1, 0]).unwrap();
        assert_eq!(faithfulness_witness(&id, &id).unwrap(), None);
        assert_eq!(faithfulness_witness(&id, &not).unwrap(), Some(0));
        for n in 0..=3 {
            for m in 1..=3 {
                let fs = all_functions(n, m);
                for f in &fs {
                    for g in &fs {
                        let w = faithfulness_witness(f, g).unwrap();
                        assert_eq!(w.is_none(), f == g);
                        if let Some(s) = w {
                            assert_ne!(f.apply(s), g.apply(s));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn nat_builtins() {
        let succ = builtin("succ").unwrap().arrow();
        let out = nat_point(3).apply(&succ).unwrap();
        assert_eq!(out.parts.keys().collect::<Vec<_>>(), vec![&BlockKey::flat(4)]);

        let add = builtin("add").unwrap().arrow();
        let pair = Signature::tensor(&Signature::nat(), &Signature::nat());
        let key = BlockKey { term: 0, idx: vec![2, 3] };
        assert!(pair.contains(&key));
        let st = StateVector {
            signature: pair,
            parts: BTreeMap::from([(key, crate::matrix::CMatrix::diag(&[1.0]))]),
        };
        let out = st.apply(&add).unwrap();
        assert_eq!(out.weight(&BlockKey::flat(5)), 1.0);

        let mut spread = nat_point(0);
        spread.parts.insert(BlockKey::flat(0), crate::matrix::CMatrix::diag(&[0.5]));
        spread.parts.insert(BlockKey::flat(1), crate::matrix::CMatrix::diag(&[0.5]));
        let out = spread.apply(&succ).unwrap();
        assert_eq!(out.weight(&BlockKey::flat(1)), 0.5);
        assert_eq!(out.weight(&BlockKey::flat(2)), 0.5);
        assert_eq!(out.total_weight(), 1.0);

        let pred = builtin("pred").unwrap().arrow();
        assert_eq!(nat_point(0).apply(&pred).unwrap().weight(&BlockKey::flat(0)), 1.0);
        let iszero = builtin("iszero").unwrap().arrow();
        assert_eq!(*iszero.target(), Signature::bit());
        assert_eq!(nat_point(0).apply(&iszero).unwrap().weight(&BlockKey::flat(1)), 1.0);
        assert_eq!(nat_point(7).apply(&iszero).unwrap().weight(&BlockKey::flat(0)), 1.0);

        let keep = builtin("succ").unwrap().arrow_keeping_args();
        let out = nat_point(2).apply(&keep).unwrap();
        assert_eq!(out.parts.keys().next().unwrap().idx, vec![2, 3]);
    }

    #[test]
    fn bit_builtins_are_truth_tables() {
        for (name, table) in [("and", [0, 0, 0, 1]), ("or", [0, 1, 1, 1]), ("xor", [0, 1, 1, 0])] {
            let a = builtin(name).unwrap().arrow();
            for (k, &v) in table.iter().enumerate() {
                assert_eq!(a.column(&BlockKey::flat(k))[0].0, BlockKey::flat(v), "{name}");
            }
        }
    }
}
