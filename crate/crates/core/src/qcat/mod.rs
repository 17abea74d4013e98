//! The semantic category: arrows are matrices `(f_ij)` of completely positive
//! block maps between signatures, in the Schrödinger orientation, with every
//! column trace-nonincreasing.
//!
//! An arrow is stored column by column: the column of source block `j` lists
//! the nonzero blocks `f_ij` keyed by target block `i`. Arrows out of a finite
//! signature are materialized eagerly. Arrows out of a signature containing
//! `nat` have infinitely many columns; they are column-finite and each column is
//! computed on first use and memoized.

mod dual;
mod dump;
mod kleene;
mod qbit;
mod state;

pub use dual::WstarArrow;
pub use dump::{ArrowDump, BlockDump, CheckReport, ConvergenceInfo};
pub use kleene::{
    fix, fix_functional, fix_functional_tuple, lub_chain, trace, trace_column_forward, trace_forward,
    Fixed,
    KleeneOptions, LoopStats, LubResult, TraceIter, Traced,
};
pub use qbit::{dephasing, discard_qbit, qbit_structure, unitary_lift};
pub use state::{EffectVector, StateVector};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::cpmap::{cp_leq_slack, KrausMap};
use crate::error::{Error, Result};
use crate::matrix::{loewner_leq, CMatrix, Tolerance};
use crate::signature::{
    BlockKey, BlockPermutation, Distributivity, Side, Signature, SumLayout, TensorLayout,
};

/// Nonzero blocks of one column, sorted by target key.
pub type Column = Vec<(BlockKey, KrausMap)>;

type ColumnFn = dyn Fn(&BlockKey) -> Column + Send + Sync;

struct LazyColumns {
    f: Box<ColumnFn>,
    memo: Mutex<HashMap<BlockKey, Arc<Column>>>,
}

#[derive(Clone)]
enum Store {
    Eager(Arc<Vec<Arc<Column>>>),
    Lazy(Arc<LazyColumns>),
}

/// An arrow `source → target` of the category.
#[derive(Clone)]
pub struct QArrow {
    source: Signature,
    target: Signature,
    store: Store,
}

impl fmt::Debug for QArrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QArrow({} -> {}", self.source, self.target)?;
        if let Store::Eager(cols) = &self.store {
            for (j, col) in cols.iter().enumerate() {
                for (i, m) in col.iter() {
                    write!(f, "; [{i},{j}]: {} kraus", m.kraus().len())?;
                }
            }
        } else {
            write!(f, "; lazy")?;
        }
        write!(f, ")")
    }
}

/// Sums Kraus maps landing in the same target block.
#[derive(Default)]
pub(crate) struct ColumnAcc {
    entries: BTreeMap<BlockKey, KrausMap>,
}

impl ColumnAcc {
    pub(crate) fn add(&mut self, key: BlockKey, map: KrausMap) {
        if map.is_zero() {
            return;
        }
        match self.entries.remove(&key) {
            Some(prev) => {
                let sum = prev.sum(&map).expect("blocks at the same key share dimensions");
                self.entries.insert(key, sum);
            }
            None => {
                self.entries.insert(key, map);
            }
        }
    }

    pub(crate) fn into_column(self) -> Column {
        self.entries.into_iter().collect()
    }
}

impl QArrow {
    /// Builds an arrow from a column function without validating it.
    pub(crate) fn from_column_fn<F>(source: Signature, target: Signature, f: F) -> QArrow
    where
        F: Fn(&BlockKey) -> Column + Send + Sync + 'static,
    {
        let store = match source.keys() {
            Some(keys) => Store::Eager(Arc::new(keys.iter().map(|k| Arc::new(f(k))).collect())),
            None => Store::Lazy(Arc::new(LazyColumns {
                f: Box::new(f),
                memo: Mutex::new(HashMap::new()),
            })),
        };
        QArrow {
            source,
            target,
            store,
        }
    }

    /// A finite arrow from its dense block matrix: `blocks[i][j]` maps source
    /// block `j` to target block `i`. Checks dimensions and the
    /// trace-nonincreasing condition.
    pub fn from_blocks(
        source: Signature,
        target: Signature,
        blocks: Vec<Vec<KrausMap>>,
        tol: &Tolerance,
    ) -> Result<QArrow> {
        let arrow = Self::from_blocks_unchecked(source, target, blocks)?;
        arrow.check_invariants(tol)?;
        Ok(arrow)
    }

    pub(crate) fn from_blocks_unchecked(
        source: Signature,
        target: Signature,
        blocks: Vec<Vec<KrausMap>>,
    ) -> Result<QArrow> {
        let (Some(sb), Some(tb)) = (source.blocks(), target.blocks()) else {
            return Err(Error::Unsupported(
                "dense block matrices need finite signatures".into(),
            ));
        };
        if blocks.len() != tb.len() || blocks.iter().any(|row| row.len() != sb.len()) {
            return Err(Error::shape(
                format!("{}x{} block matrix", tb.len(), sb.len()),
                format!("{} rows", blocks.len()),
            ));
        }
        let mut cols: Vec<Column> = vec![Vec::new(); sb.len()];
        for (i, row) in blocks.into_iter().enumerate() {
            for (j, m) in row.into_iter().enumerate() {
                if (m.in_dim(), m.out_dim()) != (sb[j], tb[i]) {
                    return Err(Error::shape(
                        format!("block ({i},{j}) of shape {}->{}", sb[j], tb[i]),
                        format!("{}->{}", m.in_dim(), m.out_dim()),
                    ));
                }
                if !m.is_zero() {
                    cols[j].push((BlockKey::flat(i), m));
                }
            }
        }
        Ok(QArrow {
            source,
            target,
            store: Store::Eager(Arc::new(cols.into_iter().map(Arc::new).collect())),
        })
    }

    pub fn source(&self) -> &Signature {
        &self.source
    }

    pub fn target(&self) -> &Signature {
        &self.target
    }

    pub fn is_finite(&self) -> bool {
        self.source.is_finite() && self.target.is_finite()
    }

    /// The column of source block `key`.
    pub fn column(&self, key: &BlockKey) -> Arc<Column> {
        debug_assert!(self.source.contains(key), "{key} not in {}", self.source);
        match &self.store {
            Store::Eager(cols) => cols[key.idx[0]].clone(),
            Store::Lazy(lazy) => {
                if let Some(c) = lazy.memo.lock().unwrap().get(key) {
                    return c.clone();
                }
                let col = Arc::new((lazy.f)(key));
                lazy.memo
                    .lock()
                    .unwrap()
                    .entry(key.clone())
                    .or_insert(col)
                    .clone()
            }
        }
    }

    /// Source keys whose columns have been computed (all of them when eager).
    pub fn materialized_columns(&self) -> Vec<BlockKey> {
        match &self.store {
            Store::Eager(_) => self.source.keys().unwrap(),
            Store::Lazy(lazy) => {
                let mut keys: Vec<_> = lazy.memo.lock().unwrap().keys().cloned().collect();
                keys.sort();
                keys
            }
        }
    }

    /// Block `(i, j)` of a finite arrow; the zero map when absent.
    pub fn block(&self, i: usize, j: usize) -> Result<KrausMap> {
        self.keyed_block(&BlockKey::flat(i), &BlockKey::flat(j))
    }

    pub fn keyed_block(&self, target: &BlockKey, source: &BlockKey) -> Result<KrausMap> {
        let n = self.source.block_dim(source)?;
        let m = self.target.block_dim(target)?;
        Ok(self
            .column(source)
            .iter()
            .find(|(k, _)| k == target)
            .map(|(_, f)| f.clone())
            .unwrap_or_else(|| KrausMap::zero(n, m)))
    }

    /// Dense block matrix `[i][j]` of a finite arrow.
    pub fn blocks(&self) -> Result<Vec<Vec<KrausMap>>> {
        let (Some(sb), Some(tb)) = (self.source.blocks(), self.target.blocks()) else {
            return Err(Error::Unsupported("dense view of a non-finite arrow".into()));
        };
        (0..tb.len())
            .map(|i| (0..sb.len()).map(|j| self.block(i, j)).collect())
            .collect()
    }

    fn finite_source_keys(&self, what: &str) -> Result<Vec<BlockKey>> {
        self.source
            .keys()
            .ok_or_else(|| Error::Unsupported(format!("{what} over non-finite source {}", self.source)))
    }

    /// The identity on `s`.
    pub fn identity(s: &Signature) -> QArrow {
        let sig = s.clone();
        QArrow::from_column_fn(s.clone(), s.clone(), move |k| {
            vec![(k.clone(), KrausMap::identity(sig.block_dim(k).unwrap()))]
        })
    }

    /// The least arrow `⊥: s → t`.
    pub fn zero_arrow(s: &Signature, t: &Signature) -> QArrow {
        QArrow::from_column_fn(s.clone(), t.clone(), |_| Vec::new())
    }

    /// Relabels blocks along a dimension-preserving key map, with identity blocks.
    pub fn relabel<F>(source: &Signature, target: &Signature, map: F) -> QArrow
    where
        F: Fn(&BlockKey) -> BlockKey + Send + Sync + 'static,
    {
        let src = source.clone();
        QArrow::from_column_fn(source.clone(), target.clone(), move |k| {
            vec![(map(k), KrausMap::identity(src.block_dim(k).unwrap()))]
        })
    }

    pub fn from_permutation(p: &BlockPermutation) -> QArrow {
        let map = p.map.clone();
        QArrow::relabel(&p.source, &p.target, move |k| BlockKey::flat(map[k.idx[0]]))
    }

    /// `g ∘ f`; block `(i, j)` is `Σ_p g_ip ∘ f_pj`.
    pub fn compose(g: &QArrow, f: &QArrow) -> Result<QArrow> {
        if f.target != g.source {
            return Err(Error::SignatureMismatch(format!(
                "cannot compose {} -> {} after {} -> {}",
                g.source, g.target, f.source, f.target
            )));
        }
        let (f, g) = (f.clone(), g.clone());
        let (source, target) = (f.source.clone(), g.target.clone());
        Ok(QArrow::from_column_fn(source, target, move |j| {
            let mut acc = ColumnAcc::default();
            for (p, fpj) in f.column(j).iter() {
                for (i, gip) in g.column(p).iter() {
                    acc.add(i.clone(), KrausMap::compose(gip, fpj).unwrap());
                }
            }
            acc.into_column()
        }))
    }

    /// Composes a pipeline given in application order.
    pub fn chain(arrows: &[QArrow]) -> Result<QArrow> {
        let (first, rest) = arrows
            .split_first()
            .ok_or_else(|| Error::Invalid("empty composition chain".into()))?;
        rest.iter()
            .try_fold(first.clone(), |acc, next| QArrow::compose(next, &acc))
    }

    /// Coproduct injection into `s ⊕ t`: `κ_left: s → s ⊕ t`, `κ_right: t → s ⊕ t`.
    pub fn injection(s: &Signature, t: &Signature, side: Side) -> QArrow {
        let layout = SumLayout::new(s, t);
        let from = match side {
            Side::Left => s,
            Side::Right => t,
        };
        let target = layout.result.clone();
        QArrow::relabel(from, &target, move |k| layout.inject(side, k))
    }

    /// Copairing `[f, g]: s ⊕ t → u`.
    pub fn copair(f: &QArrow, g: &QArrow) -> Result<QArrow> {
        if f.target != g.target {
            return Err(Error::SignatureMismatch(format!(
                "copair targets differ: {} vs {}",
                f.target, g.target
            )));
        }
        let layout = SumLayout::new(&f.source, &g.source);
        let (f, g) = (f.clone(), g.clone());
        let source = layout.result.clone();
        Ok(QArrow::from_column_fn(source, f.target.clone(), move |k| {
            match layout.split(k) {
                (Side::Left, k) => (*f.column(&k)).clone(),
                (Side::Right, k) => (*g.column(&k)).clone(),
            }
        }))
    }

    /// `f ⊕ g: s ⊕ t → s' ⊕ t'`.
    pub fn direct_sum(f: &QArrow, g: &QArrow) -> Result<QArrow> {
        let left = QArrow::compose(&QArrow::injection(&f.target, &g.target, Side::Left), f)?;
        let right = QArrow::compose(&QArrow::injection(&f.target, &g.target, Side::Right), g)?;
        QArrow::copair(&left, &right)
    }

    /// `f ⊗ g`; block `((i,i'),(j,j'))` is `f_ij ⊗ g_i'j'`.
    pub fn tensor(f: &QArrow, g: &QArrow) -> QArrow {
        let src = Arc::new(TensorLayout::new(&f.source, &g.source));
        let tgt = Arc::new(TensorLayout::new(&f.target, &g.target));
        let (f, g) = (f.clone(), g.clone());
        let (source, target) = (src.result.clone(), tgt.result.clone());
        QArrow::from_column_fn(source, target, move |k| {
            let (kf, kg) = src.split(k);
            let (cf, cg) = (f.column(&kf), g.column(&kg));
            let mut acc = ColumnAcc::default();
            for (i, a) in cf.iter() {
                for (i2, b) in cg.iter() {
                    acc.add(tgt.join(i, i2), KrausMap::tensor(a, b));
                }
            }
            acc.into_column()
        })
    }

    /// `a ⊗ (b ⊕ c) → (a ⊗ b) ⊕ (a ⊗ c)`.
    pub fn distributor(a: &Signature, b: &Signature, c: &Signature) -> QArrow {
        let d = Distributivity::new(a, b, c);
        let (s, t) = (d.source().clone(), d.target().clone());
        QArrow::relabel(&s, &t, move |k| d.forward(k))
    }

    /// `(a ⊗ b) ⊕ (a ⊗ c) → a ⊗ (b ⊕ c)`.
    pub fn distributor_inverse(a: &Signature, b: &Signature, c: &Signature) -> QArrow {
        let d = Distributivity::new(a, b, c);
        let (s, t) = (d.target().clone(), d.source().clone());
        QArrow::relabel(&s, &t, move |k| d.backward(k))
    }

    /// Case analysis on a classical last factor: given `arms[i]: Γ → U`, the
    /// arrow `Γ ⊗ ℓ∞(m) → U` that runs arm `i` on the `i`-th summand. Built as
    /// the copairing of the arms after the distributivity isomorphism.
    pub fn branch(gamma: &Signature, arms: &[QArrow]) -> Result<QArrow> {
        match arms {
            [] => Err(Error::Invalid("branch needs at least one arm".into())),
            [only] => {
                if only.source != *gamma {
                    return Err(Error::SignatureMismatch("branch arm source".into()));
                }
                Ok(only.clone())
            }
            [first, rest @ ..] => {
                let tail = QArrow::branch(gamma, rest)?;
                let one = Signature::unit();
                let rest_sig = Signature::classical(rest.len());
                let d = QArrow::distributor(gamma, &one, &rest_sig);
                let case = QArrow::copair(first, &tail)?;
                QArrow::compose(&case, &d)
            }
        }
    }

    /// The symmetry `⊗_c components[c] → ⊗_c components[perm[c]]`: output
    /// position `c` carries input component `perm[c]`. Both the block index and
    /// the tensor factor order inside each block are permuted.
    pub fn symmetry(components: &[Signature], perm: &[usize]) -> Result<QArrow> {
        let n = components.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Invalid(format!("not a permutation: {perm:?}")));
        }
        let permuted: Vec<Signature> = perm.iter().map(|&p| components[p].clone()).collect();
        let src = Arc::new(TensorFold::new(components));
        let dst = TensorFold::new(&permuted);
        let perm = perm.to_vec();
        let comps = components.to_vec();
        let (source, target) = (src.result.clone(), dst.result.clone());
        Ok(QArrow::from_column_fn(source, target, move |k| {
            let parts = src.split(k);
            let out_parts: Vec<BlockKey> = perm.iter().map(|&p| parts[p].clone()).collect();
            let dims: Vec<usize> = parts
                .iter()
                .zip(&comps)
                .map(|(key, s)| s.block_dim(key).unwrap())
                .collect();
            let u = factor_permutation(&dims, &perm);
            vec![(dst.join(&out_parts), KrausMap::conjugation(u).unwrap())]
        }))
    }

    /// `s · f` for `s >= 0`.
    pub fn scaled(&self, s: f64) -> Result<QArrow> {
        if !(s >= 0.0) {
            return Err(Error::Invalid(format!("scale factor {s} must be >= 0")));
        }
        let f = self.clone();
        Ok(QArrow::from_column_fn(
            self.source.clone(),
            self.target.clone(),
            move |k| {
                f.column(k)
                    .iter()
                    .filter_map(|(i, m)| {
                        let m = m.scaled(s).unwrap();
                        (!m.is_zero()).then(|| (i.clone(), m))
                    })
                    .collect()
            },
        ))
    }

    /// Largest Choi-entry difference over all blocks (finite source).
    pub fn max_choi_distance(&self, other: &QArrow) -> Result<f64> {
        self.same_endpoints(other)?;
        let mut worst: f64 = 0.0;
        for j in self.finite_source_keys("max_choi_distance")? {
            worst = worst.max(self.column_distance(other, &j)?);
        }
        Ok(worst)
    }

    /// Largest Choi-entry difference over the blocks of one column.
    pub fn column_distance(&self, other: &QArrow, j: &BlockKey) -> Result<f64> {
        let (a, b) = (self.column(j), other.column(j));
        let mut worst: f64 = 0.0;
        for key in column_keys(&a, &b) {
            let x = self.keyed_block(&key, j)?;
            let y = other.keyed_block(&key, j)?;
            worst = worst.max(x.choi_distance(&y)?);
        }
        Ok(worst)
    }

    fn same_endpoints(&self, other: &QArrow) -> Result<()> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::SignatureMismatch(format!(
                "{} -> {} vs {} -> {}",
                self.source, self.target, other.source, other.target
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue of `choi(g_ij) - choi(f_ij)` over all blocks; the
    /// order `f ⊑ g` holds when this is above `-eps_psd`.
    pub fn cp_leq_slack(f: &QArrow, g: &QArrow, tol: &Tolerance) -> Result<f64> {
        f.same_endpoints(g)?;
        let mut worst = f64::INFINITY;
        for j in f.finite_source_keys("cp_leq_arrow")? {
            worst = worst.min(QArrow::column_leq_slack(f, g, &j, tol)?);
        }
        Ok(worst)
    }

    pub(crate) fn column_leq_slack(
        f: &QArrow,
        g: &QArrow,
        j: &BlockKey,
        tol: &Tolerance,
    ) -> Result<f64> {
        let (a, b) = (f.column(j), g.column(j));
        let mut worst = f64::INFINITY;
        for key in column_keys(&a, &b) {
            let x = f.keyed_block(&key, j)?;
            let y = g.keyed_block(&key, j)?;
            worst = worst.min(cp_leq_slack(&x, &y, tol)?);
        }
        Ok(worst)
    }

    /// The order `f ⊑ g`, blockwise.
    pub fn cp_leq_arrow(f: &QArrow, g: &QArrow, tol: &Tolerance) -> Result<bool> {
        Ok(QArrow::cp_leq_slack(f, g, tol)? >= -tol.eps_psd)
    }

    /// `Σ_i f_ij*(1)` for source block `j`.
    pub fn column_unit_image(&self, j: &BlockKey) -> Result<CMatrix> {
        let n = self.source.block_dim(j)?;
        Ok(self
            .column(j)
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, (_, m)| {
                &acc + &m.heisenberg_unit_image()
            }))
    }

    pub fn is_column_trace_nonincreasing(&self, j: &BlockKey, tol: &Tolerance) -> Result<bool> {
        let n = self.source.block_dim(j)?;
        loewner_leq(&self.column_unit_image(j)?, &CMatrix::identity(n), tol)
    }

    pub fn is_column_trace_preserving(&self, j: &BlockKey, tol: &Tolerance) -> Result<bool> {
        let n = self.source.block_dim(j)?;
        Ok(self
            .column_unit_image(j)?
            .max_abs_diff(&CMatrix::identity(n))
            <= tol.eps_eq)
    }

    /// Every column trace-nonincreasing (finite source).
    pub fn is_trace_nonincreasing(&self, tol: &Tolerance) -> Result<bool> {
        for j in self.finite_source_keys("trace check")? {
            if !self.is_column_trace_nonincreasing(&j, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_trace_preserving(&self, tol: &Tolerance) -> Result<bool> {
        for j in self.finite_source_keys("trace check")? {
            if !self.is_column_trace_preserving(&j, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Checks block shapes and the trace-nonincreasing condition on the given
    /// columns (all columns when the source is finite).
    pub fn check_columns(&self, keys: &[BlockKey], tol: &Tolerance) -> Result<()> {
        for j in keys {
            let n = self.source.block_dim(j)?;
            for (i, m) in self.column(j).iter() {
                let d = self.target.block_dim(i)?;
                if (m.in_dim(), m.out_dim()) != (n, d) {
                    return Err(Error::Invariant(format!("block ({i},{j}) has the wrong shape")));
                }
            }
            if !self.is_column_trace_nonincreasing(j, tol)? {
                return Err(Error::Invariant(format!(
                    "column {j} is not trace-nonincreasing"
                )));
            }
        }
        Ok(())
    }

    pub fn check_invariants(&self, tol: &Tolerance) -> Result<()> {
        let keys = self.finite_source_keys("invariant check")?;
        self.check_columns(&keys, tol)
    }
}

fn column_keys(a: &Column, b: &Column) -> Vec<BlockKey> {
    let mut keys: Vec<BlockKey> = a.iter().chain(b.iter()).map(|(k, _)| k.clone()).collect();
    keys.sort();
    keys.dedup();
    keys
}

/// Left fold of tensor layouts over a list of component signatures.
pub(crate) struct TensorFold {
    pub(crate) result: Signature,
    layouts: Vec<TensorLayout>,
}

impl TensorFold {
    pub(crate) fn new(components: &[Signature]) -> Self {
        let mut acc = Signature::unit();
        let mut layouts = Vec::new();
        for c in components {
            let l = TensorLayout::new(&acc, c);
            acc = l.result.clone();
            layouts.push(l);
        }
        TensorFold {
            result: acc,
            layouts,
        }
    }

    pub(crate) fn split(&self, key: &BlockKey) -> Vec<BlockKey> {
        let mut parts = Vec::with_capacity(self.layouts.len());
        let mut k = key.clone();
        for l in self.layouts.iter().rev() {
            let (rest, last) = l.split(&k);
            parts.push(last);
            k = rest;
        }
        parts.reverse();
        parts
    }

    pub(crate) fn join(&self, parts: &[BlockKey]) -> BlockKey {
        let mut k = BlockKey::flat(0);
        for (l, p) in self.layouts.iter().zip(parts) {
            k = l.join(&k, p);
        }
        k
    }
}

/// Permutation matrix on `⊗_c C^{dims[c]}` sending factor `perm[c]` to position `c`.
fn factor_permutation(dims: &[usize], perm: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut u = CMatrix::zeros(total, total);
    let mut digits = vec![0usize; dims.len()];
    for col in 0..total {
        let mut r = col;
        for c in (0..dims.len()).rev() {
            digits[c] = r % dims[c];
            r /= dims[c];
        }
        let row = perm
            .iter()
            .zip(&out_dims)
            .fold(0, |acc, (&p, &d)| acc * d + digits[p]);
        u.set(row, col, crate::matrix::ONE);
    }
    u
}
