//! Objects of the semantic category: direct sums of tensor products of
//! matrix-block lists and the countable classical object `nat`.
//!
//! A finite signature is a list of block dimensions `(n1, ..., nk)` and denotes
//! `M_n1 ⊕ ... ⊕ M_nk`. Once `nat = ⊕_{i∈ℕ} ℂ` enters, a signature is kept as a
//! sum of *terms*, each term a tensor product of *factors*; blocks are then
//! addressed by a [`BlockKey`] holding the term and one index per factor.
//!
//! Canonical form, which makes `⊕` and `⊗` strictly associative with strict
//! unit laws on the representation:
//! - a term never holds two adjacent `Blocks` factors (they are multiplied out
//!   lexicographically, left factor major);
//! - a term holds the unit factor `(1)` only when it is its only factor;
//! - a signature never holds two adjacent all-finite terms (they are
//!   concatenated), so a finite signature is a single term with a single
//!   `Blocks` factor and its keys are plain block positions.
//!
//! The distributivity isomorphisms `A ⊗ (B ⊕ C) ≅ (A ⊗ B) ⊕ (A ⊗ C)` become
//! pure index maps, computed by [`TensorLayout`] and [`SumLayout`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    Blocks(Vec<usize>),
    Nat,
}

impl Factor {
    fn len(&self) -> Option<usize> {
        match self {
            Factor::Blocks(b) => Some(b.len()),
            Factor::Nat => None,
        }
    }

    fn dim(&self, idx: usize) -> usize {
        match self {
            Factor::Blocks(b) => b[idx],
            Factor::Nat => 1,
        }
    }

    fn is_unit(&self) -> bool {
        matches!(self, Factor::Blocks(b) if b.as_slice() == [1])
    }
}

type Term = Vec<Factor>;

fn term_is_finite(t: &Term) -> bool {
    t.iter().all(|f| matches!(f, Factor::Blocks(_)))
}

fn finite_blocks(t: &Term) -> &[usize] {
    match t.as_slice() {
        [Factor::Blocks(b)] => b,
        _ => unreachable!("finite terms are a single Blocks factor"),
    }
}

fn blocks_product(x: &[usize], y: &[usize]) -> Vec<usize> {
    x.iter()
        .flat_map(|&a| y.iter().map(move |&b| a * b))
        .collect()
}

/// Address of one matrix block inside a signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockKey {
    pub term: usize,
    pub idx: Vec<usize>,
}

impl BlockKey {
    /// Key of block `i` in a finite signature.
    pub fn flat(i: usize) -> Self {
        BlockKey {
            term: 0,
            idx: vec![i],
        }
    }
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.term == 0 && self.idx.len() == 1 {
            return write!(f, "{}", self.idx[0]);
        }
        write!(f, "{}:", self.term)?;
        for (k, i) in self.idx.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

impl FromStr for BlockKey {
    type Err = Error;

    /// Parses `i` (finite block position) or `term:i,j,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad block key {s:?}"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(':') {
            None => Ok(BlockKey::flat(num(s)?)),
            Some((term, rest)) => Ok(BlockKey {
                term: num(term)?,
                idx: rest.split(',').map(num).collect::<Result<_>>()?,
            }),
        }
    }
}

/// An object of the category: a finite-dimensional W*-algebra, possibly with
/// countable classical summands.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    terms: Vec<Term>,
}

impl Signature {
    /// The zero object `()`.
    pub fn zero() -> Self {
        Signature { terms: Vec::new() }
    }

    /// The monoidal unit `(1)`, i.e. `ℂ`.
    pub fn unit() -> Self {
        Signature {
            terms: vec![vec![Factor::Blocks(vec![1])]],
        }
    }

    /// `M_n1 ⊕ ... ⊕ M_nk`; every dimension must be at least 1.
    pub fn finite(blocks: Vec<usize>) -> Result<Self> {
        if blocks.contains(&0) {
            return Err(Error::Invalid(format!(
                "block dimensions must be >= 1: {blocks:?}"
            )));
        }
        if blocks.is_empty() {
            return Ok(Self::zero());
        }
        Ok(Signature {
            terms: vec![vec![Factor::Blocks(blocks)]],
        })
    }

    /// `bit = ℂ ⊕ ℂ`.
    pub fn bit() -> Self {
        Self::classical(2)
    }

    /// `qbit = M_2`.
    pub fn qbit() -> Self {
        Self::finite(vec![2]).unwrap()
    }

    /// `ℓ∞(n) = ℂ^n`, `n` blocks of dimension 1.
    pub fn classical(n: usize) -> Self {
        Self::finite(vec![1; n]).unwrap()
    }

    /// The countable classical object `⊕_{i∈ℕ} ℂ`.
    pub fn nat() -> Self {
        Signature {
            terms: vec![vec![Factor::Nat]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(term_is_finite)
    }

    pub fn is_nat_like(&self) -> bool {
        !self.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Block dimensions of a finite signature.
    pub fn blocks(&self) -> Option<&[usize]> {
        match self.terms.as_slice() {
            [] => Some(&[]),
            [t] if term_is_finite(t) => Some(finite_blocks(t)),
            _ => None,
        }
    }

    fn finite_blocks_or_err(&self, what: &str) -> Result<&[usize]> {
        self.blocks()
            .ok_or_else(|| Error::Unsupported(format!("{what} of non-finite signature {self}")))
    }

    /// Number of blocks of a finite signature.
    pub fn num_blocks(&self) -> Option<usize> {
        self.blocks().map(<[usize]>::len)
    }

    /// `Σ n_i²`, the vector-space dimension of the algebra.
    pub fn total_dim(&self) -> Result<usize> {
        Ok(self
            .finite_blocks_or_err("total_dim")?
            .iter()
            .map(|n| n * n)
            .sum())
    }

    /// All block keys, in order, for a finite signature.
    pub fn keys(&self) -> Option<Vec<BlockKey>> {
        self.blocks()
            .map(|b| (0..b.len()).map(BlockKey::flat).collect())
    }

    /// All keys whose `nat` indices are below `bound`, term by term.
    pub fn keys_up_to(&self, bound: usize) -> Vec<BlockKey> {
        let mut out = Vec::new();
        for (t, term) in self.terms.iter().enumerate() {
            let mut idxs: Vec<Vec<usize>> = vec![Vec::new()];
            for f in term {
                let n = f.len().unwrap_or(bound);
                idxs = idxs
                    .into_iter()
                    .flat_map(|prefix| {
                        (0..n).map(move |i| {
                            let mut p = prefix.clone();
                            p.push(i);
                            p
                        })
                    })
                    .collect();
            }
            out.extend(idxs.into_iter().map(|idx| BlockKey { term: t, idx }));
        }
        out
    }

    pub fn contains(&self, key: &BlockKey) -> bool {
        let Some(term) = self.terms.get(key.term) else {
            return false;
        };
        term.len() == key.idx.len()
            && term
                .iter()
                .zip(&key.idx)
                .all(|(f, &i)| f.len().is_none_or(|n| i < n))
    }

    /// Matrix size of the block at `key`.
    pub fn block_dim(&self, key: &BlockKey) -> Result<usize> {
        if !self.contains(key) {
            return Err(Error::SignatureMismatch(format!(
                "block {key} is not in {self}"
            )));
        }
        Ok(self.terms[key.term]
            .iter()
            .zip(&key.idx)
            .map(|(f, &i)| f.dim(i))
            .product())
    }

    /// Position of `key` in a finite signature.
    pub fn flat_index(&self, key: &BlockKey) -> Option<usize> {
        (self.is_finite() && self.contains(key)).then(|| key.idx[0])
    }

    /// Direct sum `a ⊕ b`.
    pub fn direct_sum(a: &Signature, b: &Signature) -> Signature {
        SumLayout::new(a, b).result
    }

    /// Tensor product `a ⊗ b`.
    pub fn tensor(a: &Signature, b: &Signature) -> Signature {
        TensorLayout::new(a, b).result
    }

    pub fn direct_sum_all<'a>(sigs: impl IntoIterator<Item = &'a Signature>) -> Signature {
        sigs.into_iter()
            .fold(Signature::zero(), |acc, s| Signature::direct_sum(&acc, s))
    }

    pub fn tensor_all<'a>(sigs: impl IntoIterator<Item = &'a Signature>) -> Signature {
        sigs.into_iter()
            .fold(Signature::unit(), |acc, s| Signature::tensor(&acc, s))
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "()");
        }
        for (t, term) in self.terms.iter().enumerate() {
            if t > 0 {
                write!(f, " ⊕ ")?;
            }
            for (k, factor) in term.iter().enumerate() {
                if k > 0 {
                    write!(f, " ⊗ ")?;
                }
                match factor {
                    Factor::Nat => write!(f, "nat")?,
                    Factor::Blocks(b) => {
                        let parts: Vec<String> = b.iter().map(usize::to_string).collect();
                        write!(f, "({})", parts.join(","))?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl FromStr for Signature {
    type Err = Error;

    /// Parses the rendering produced by `Display`; `+`/`*` are accepted for `⊕`/`⊗`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('⊕', "+").replace('⊗', "*");
        let bad = |msg: &str| Error::Invalid(format!("bad signature {s:?}: {msg}"));
        let mut out = Signature::zero();
        for term in s.split('+') {
            let mut acc = Signature::unit();
            for factor in term.split('*') {
                let factor = factor.trim();
                let sig = if factor == "nat" {
                    Signature::nat()
                } else if let Some(inner) =
                    factor.strip_prefix('(').and_then(|f| f.strip_suffix(')'))
                {
                    let blocks = if inner.trim().is_empty() {
                        Vec::new()
                    } else {
                        inner
                            .split(',')
                            .map(|n| n.trim().parse::<usize>().map_err(|_| bad("block")))
                            .collect::<Result<Vec<_>>>()?
                    };
                    Signature::finite(blocks)?
                } else {
                    return Err(bad("expected `nat` or `(n,...)`"));
                };
                acc = Signature::tensor(&acc, &sig);
            }
            out = Signature::direct_sum(&out, &acc);
        }
        Ok(out)
    }
}

impl Serialize for Signature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Index bookkeeping for `a ⊕ b`.
#[derive(Debug, Clone)]
pub struct SumLayout {
    pub left: Signature,
    pub right: Signature,
    pub result: Signature,
    /// Whether the last term of `left` absorbed the first term of `right`.
    merged: bool,
    left_tail_len: usize,
}

impl SumLayout {
    pub fn new(a: &Signature, b: &Signature) -> Self {
        let merged = matches!(
            (a.terms.last(), b.terms.first()),
            (Some(x), Some(y)) if term_is_finite(x) && term_is_finite(y)
        );
        let mut terms = a.terms.clone();
        let mut left_tail_len = 0;
        let mut rest = b.terms.iter();
        if merged {
            let head = rest.next().unwrap();
            let last = terms.last_mut().unwrap();
            let mut blocks = finite_blocks(last).to_vec();
            left_tail_len = blocks.len();
            blocks.extend_from_slice(finite_blocks(head));
            *last = vec![Factor::Blocks(blocks)];
        }
        terms.extend(rest.cloned());
        SumLayout {
            left: a.clone(),
            right: b.clone(),
            result: Signature { terms },
            merged,
            left_tail_len,
        }
    }

    fn shift(&self) -> usize {
        self.left.terms.len() - usize::from(self.merged)
    }

    pub fn inject(&self, side: Side, key: &BlockKey) -> BlockKey {
        match side {
            Side::Left => key.clone(),
            Side::Right if self.merged && key.term == 0 => BlockKey {
                term: self.left.terms.len() - 1,
                idx: vec![key.idx[0] + self.left_tail_len],
            },
            Side::Right => BlockKey {
                term: key.term + self.shift(),
                idx: key.idx.clone(),
            },
        }
    }

    pub fn split(&self, key: &BlockKey) -> (Side, BlockKey) {
        let n_left = self.left.terms.len();
        if self.merged && key.term == n_left - 1 {
            return if key.idx[0] < self.left_tail_len {
                (Side::Left, key.clone())
            } else {
                (Side::Right, BlockKey::flat(key.idx[0] - self.left_tail_len))
            };
        }
        if key.term < n_left {
            (Side::Left, key.clone())
        } else {
            (
                Side::Right,
                BlockKey {
                    term: key.term - self.shift(),
                    idx: key.idx.clone(),
                },
            )
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Join {
    Concat,
    Merge { right_len: usize },
    DropLeft,
    DropRight,
}

fn term_product(t: &Term, u: &Term) -> (Term, Join) {
    let tail = t.last().unwrap();
    let head = u.first().unwrap();
    match (tail, head) {
        (Factor::Blocks(x), Factor::Blocks(y)) => {
            let mut out: Term = t[..t.len() - 1].to_vec();
            out.push(Factor::Blocks(blocks_product(x, y)));
            out.extend_from_slice(&u[1..]);
            (out, Join::Merge { right_len: y.len() })
        }
        _ if t.len() == 1 && tail.is_unit() => (u.clone(), Join::DropLeft),
        _ if u.len() == 1 && head.is_unit() => (t.clone(), Join::DropRight),
        _ => ([t.as_slice(), u.as_slice()].concat(), Join::Concat),
    }
}

#[derive(Debug, Clone)]
struct PreTerm {
    result_term: usize,
    offset: usize,
    join: Join,
    left_factors: usize,
    len: usize,
}

/// Index bookkeeping for `a ⊗ b`: terms distribute lexicographically (`a` major).
#[derive(Debug, Clone)]
pub struct TensorLayout {
    pub left: Signature,
    pub right: Signature,
    pub result: Signature,
    pre: Vec<PreTerm>,
    groups: Vec<Vec<usize>>,
}

impl TensorLayout {
    pub fn new(a: &Signature, b: &Signature) -> Self {
        let mut terms: Vec<Term> = Vec::new();
        let mut pre = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for t in &a.terms {
            for u in &b.terms {
                let (term, join) = term_product(t, u);
                let finite = term_is_finite(&term);
                let extend = finite && terms.last().is_some_and(term_is_finite);
                let (result_term, offset, len) = if extend {
                    let last = terms.last_mut().unwrap();
                    let mut blocks = finite_blocks(last).to_vec();
                    let offset = blocks.len();
                    let new = finite_blocks(&term);
                    blocks.extend_from_slice(new);
                    *last = vec![Factor::Blocks(blocks)];
                    groups.last_mut().unwrap().push(pre.len());
                    (terms.len() - 1, offset, new.len())
                } else {
                    let len = if finite { finite_blocks(&term).len() } else { 0 };
                    terms.push(term);
                    groups.push(vec![pre.len()]);
                    (terms.len() - 1, 0, len)
                };
                pre.push(PreTerm {
                    result_term,
                    offset,
                    join,
                    left_factors: t.len(),
                    len,
                });
            }
        }
        TensorLayout {
            left: a.clone(),
            right: b.clone(),
            result: Signature { terms },
            pre,
            groups,
        }
    }

    pub fn join(&self, ka: &BlockKey, kb: &BlockKey) -> BlockKey {
        let p = &self.pre[ka.term * self.right.terms.len() + kb.term];
        let mut idx = match p.join {
            Join::Concat => [ka.idx.as_slice(), kb.idx.as_slice()].concat(),
            Join::Merge { right_len } => {
                let n = ka.idx.len();
                let mut v = ka.idx[..n - 1].to_vec();
                v.push(ka.idx[n - 1] * right_len + kb.idx[0]);
                v.extend_from_slice(&kb.idx[1..]);
                v
            }
            Join::DropLeft => kb.idx.clone(),
            Join::DropRight => ka.idx.clone(),
        };
        if p.offset > 0 {
            idx[0] += p.offset;
        }
        BlockKey {
            term: p.result_term,
            idx,
        }
    }

    pub fn split(&self, key: &BlockKey) -> (BlockKey, BlockKey) {
        let group = &self.groups[key.term];
        let (pi, local) = if group.len() == 1 {
            let p = &self.pre[group[0]];
            let mut idx = key.idx.clone();
            if p.len > 0 {
                idx[0] -= p.offset;
            }
            (group[0], idx)
        } else {
            let i = key.idx[0];
            let &pi = group
                .iter()
                .find(|&&pi| {
                    let p = &self.pre[pi];
                    p.offset <= i && i < p.offset + p.len
                })
                .expect("key within finite group");
            (pi, vec![i - self.pre[pi].offset])
        };
        let nb = self.right.terms.len();
        let (ta, tb) = (pi / nb, pi % nb);
        let p = &self.pre[pi];
        let (ia, ib) = match p.join {
            Join::Concat => (local[..p.left_factors].to_vec(), local[p.left_factors..].to_vec()),
            Join::Merge { right_len } => {
                let n = p.left_factors;
                let m = local[n - 1];
                let mut ia = local[..n - 1].to_vec();
                ia.push(m / right_len);
                let mut ib = vec![m % right_len];
                ib.extend_from_slice(&local[n..]);
                (ia, ib)
            }
            Join::DropLeft => (vec![0], local),
            Join::DropRight => (local, vec![0]),
        };
        (
            BlockKey { term: ta, idx: ia },
            BlockKey { term: tb, idx: ib },
        )
    }
}

/// A dimension-preserving bijection between the blocks of two finite signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPermutation {
    pub source: Signature,
    pub target: Signature,
    /// `map[i]` is the target position of source block `i`.
    pub map: Vec<usize>,
}

impl BlockPermutation {
    pub fn new(source: Signature, target: Signature, map: Vec<usize>) -> Result<Self> {
        let (Some(sb), Some(tb)) = (source.blocks(), target.blocks()) else {
            return Err(Error::Unsupported("permutations of non-finite signatures".into()));
        };
        let mut seen = vec![false; tb.len()];
        if map.len() != sb.len() || sb.len() != tb.len() {
            return Err(Error::Invalid("permutation length mismatch".into()));
        }
        for (i, &j) in map.iter().enumerate() {
            if j >= tb.len() || seen[j] || sb[i] != tb[j] {
                return Err(Error::Invalid(format!("not a block bijection: {map:?}")));
            }
            seen[j] = true;
        }
        Ok(BlockPermutation {
            source,
            target,
            map,
        })
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        BlockPermutation {
            source: self.target.clone(),
            target: self.source.clone(),
            map: inv,
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &BlockPermutation) -> Result<Self> {
        if self.target != other.source {
            return Err(Error::SignatureMismatch("permutation composition".into()));
        }
        Ok(BlockPermutation {
            source: self.source.clone(),
            target: other.target.clone(),
            map: self.map.iter().map(|&j| other.map[j]).collect(),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }
}

/// Key map `a ⊗ (b ⊕ c) → (a ⊗ b) ⊕ (a ⊗ c)` for arbitrary signatures.
#[derive(Debug, Clone)]
pub struct Distributivity {
    inner: SumLayout,
    lhs: TensorLayout,
    ab: TensorLayout,
    ac: TensorLayout,
    rhs: SumLayout,
}

impl Distributivity {
    pub fn new(a: &Signature, b: &Signature, c: &Signature) -> Self {
        let inner = SumLayout::new(b, c);
        let lhs = TensorLayout::new(a, &inner.result);
        let ab = TensorLayout::new(a, b);
        let ac = TensorLayout::new(a, c);
        let rhs = SumLayout::new(&ab.result, &ac.result);
        Distributivity {
            inner,
            lhs,
            ab,
            ac,
            rhs,
        }
    }

    pub fn source(&self) -> &Signature {
        &self.lhs.result
    }

    pub fn target(&self) -> &Signature {
        &self.rhs.result
    }

    pub fn forward(&self, key: &BlockKey) -> BlockKey {
        let (ka, kbc) = self.lhs.split(key);
        match self.inner.split(&kbc) {
            (Side::Left, kb) => self.rhs.inject(Side::Left, &self.ab.join(&ka, &kb)),
            (Side::Right, kc) => self.rhs.inject(Side::Right, &self.ac.join(&ka, &kc)),
        }
    }

    pub fn backward(&self, key: &BlockKey) -> BlockKey {
        let (ka, x) = match self.rhs.split(key) {
            (Side::Left, k) => {
                let (ka, kb) = self.ab.split(&k);
                (ka, self.inner.inject(Side::Left, &kb))
            }
            (Side::Right, k) => {
                let (ka, kc) = self.ac.split(&k);
                (ka, self.inner.inject(Side::Right, &kc))
            }
        };
        self.lhs.join(&ka, &x)
    }
}

/// The canonical bijection `a ⊗ (b ⊕ c) ≅ (a ⊗ b) ⊕ (a ⊗ c)` on finite signatures.
pub fn distributivity_iso(a: &Signature, b: &Signature, c: &Signature) -> Result<BlockPermutation> {
    for s in [a, b, c] {
        s.finite_blocks_or_err("distributivity_iso")?;
    }
    let d = Distributivity::new(a, b, c);
    let n = d.source().num_blocks().unwrap();
    let map = (0..n)
        .map(|i| d.forward(&BlockKey::flat(i)).idx[0])
        .collect();
    BlockPermutation::new(d.source().clone(), d.target().clone(), map)
}
