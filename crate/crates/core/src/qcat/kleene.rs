//! Least fixed points by Kleene iteration: the trace, the Conway operator and
//! fixed points of functionals on hom-sets.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Column, ColumnAcc, ConvergenceInfo, QArrow};
use crate::cpmap::KrausMap;
use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance};
use crate::signature::{BlockKey, Side, Signature, SumLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KleeneOptions {
    pub tol: Tolerance,
    pub max_iter: usize,
    /// Check `iterate_n ⊑ iterate_{n+1}` after every step.
    pub check_monotone: bool,
}

impl Default for KleeneOptions {
    fn default() -> Self {
        KleeneOptions {
            tol: Tolerance::default(),
            max_iter: 10_000,
            check_monotone: true,
        }
    }
}

impl KleeneOptions {
    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// Convergence bookkeeping shared by all columns of a fixed-point arrow.
#[derive(Debug, Default)]
pub struct LoopStats {
    inner: Mutex<ConvergenceInfo>,
}

impl LoopStats {
    fn record(&self, info: &ConvergenceInfo) {
        let mut s = self.inner.lock().unwrap();
        s.iterations = s.iterations.max(info.iterations);
        s.converged &= info.converged;
        s.residual = s.residual.max(info.residual);
        s.columns += 1;
        s.visited_keys = s.visited_keys.max(info.visited_keys);
    }

    pub(crate) fn set(&self, info: ConvergenceInfo) {
        *self.inner.lock().unwrap() = info;
    }

    /// Totals over the columns evaluated so far.
    pub fn snapshot(&self) -> ConvergenceInfo {
        self.inner.lock().unwrap().clone()
    }
}

/// A fixed-point arrow together with its convergence record. For arrows out of
/// `nat`, the record grows as more columns are evaluated.
#[derive(Debug, Clone)]
pub struct Traced {
    pub arrow: QArrow,
    pub stats: Arc<LoopStats>,
}

pub type Fixed = Traced;

impl Traced {
    pub fn converged(&self) -> bool {
        self.stats.snapshot().converged
    }

    pub fn iterations(&self) -> usize {
        self.stats.snapshot().iterations
    }
}

fn check_sum(f: &QArrow, s: &Signature, t: &Signature, x: &Signature) -> Result<()> {
    let (sx, tx) = (Signature::direct_sum(s, x), Signature::direct_sum(t, x));
    if *f.source() != sx || *f.target() != tx {
        return Err(Error::SignatureMismatch(format!(
            "trace expects {sx} -> {tx}, got {} -> {}",
            f.source(),
            f.target()
        )));
    }
    Ok(())
}

fn monotone_step(prev: &QArrow, next: &QArrow, step: usize, opts: &KleeneOptions) -> Result<()> {
    if !opts.check_monotone {
        return Ok(());
    }
    let slack = QArrow::cp_leq_slack(prev, next, &opts.tol)?;
    if slack < -opts.tol.eps_psd {
        return Err(Error::NonMonotone {
            step,
            min_eigenvalue: slack,
        });
    }
    Ok(())
}

/// The iterates `T_n: s ⊕ x → t` with `T_0 = ⊥` and
/// `T_{n+1} = [id_t, T_n ∘ κ₂] ∘ f`.
pub struct TraceIter {
    f: QArrow,
    id_t: QArrow,
    kappa2: QArrow,
    kappa1: QArrow,
    current: QArrow,
    n: usize,
}

impl TraceIter {
    pub fn new(f: &QArrow, s: &Signature, t: &Signature, x: &Signature) -> Result<Self> {
        check_sum(f, s, t, x)?;
        Ok(TraceIter {
            f: f.clone(),
            id_t: QArrow::identity(t),
            kappa2: QArrow::injection(s, x, Side::Right),
            kappa1: QArrow::injection(s, x, Side::Left),
            current: QArrow::zero_arrow(f.source(), t),
            n: 0,
        })
    }

    /// `T_n`.
    pub fn current(&self) -> &QArrow {
        &self.current
    }

    pub fn index(&self) -> usize {
        self.n
    }

    /// `T_n ∘ κ₁: s → t`, the `n`-th approximant of the trace.
    pub fn approximant(&self) -> Result<QArrow> {
        QArrow::compose(&self.current, &self.kappa1)
    }

    /// Advances to `T_{n+1}` and returns it.
    pub fn step(&mut self) -> Result<&QArrow> {
        let back = QArrow::compose(&self.current, &self.kappa2)?;
        let next = QArrow::compose(&QArrow::copair(&self.id_t, &back)?, &self.f)?;
        self.current = next;
        self.n += 1;
        Ok(&self.current)
    }
}

/// `Tr(f): s → t` for `f: s ⊕ x → t ⊕ x`.
///
/// Finite sources run the iteration on whole arrows. Sources containing `nat`
/// use [`trace_forward`], which computes the same iterates one column at a time.
pub fn trace(
    f: &QArrow,
    s: &Signature,
    t: &Signature,
    x: &Signature,
    opts: &KleeneOptions,
) -> Result<Traced> {
    check_sum(f, s, t, x)?;
    if !f.source().is_finite() {
        return trace_forward(f, s, t, x, opts);
    }
    let mut it = TraceIter::new(f, s, t, x)?;
    let mut prev = it.current().clone();
    let mut info = ConvergenceInfo {
        converged: false,
        columns: s.num_blocks().unwrap_or(0),
        ..ConvergenceInfo::default()
    };
    for n in 1..=opts.max_iter {
        let next = it.step()?.clone();
        monotone_step(&prev, &next, n, opts)?;
        let d = prev.max_choi_distance(&next)?;
        info.iterations = n;
        info.residual = d;
        prev = next;
        if d <= opts.tol.eps_fix {
            info.converged = true;
            break;
        }
    }
    let stats = Arc::new(LoopStats::default());
    stats.set(info);
    Ok(Traced {
        arrow: it.approximant()?,
        stats,
    })
}

fn merge(map: &mut BTreeMap<BlockKey, KrausMap>, key: BlockKey, m: KrausMap) {
    if m.is_zero() {
        return;
    }
    match map.remove(&key) {
        Some(prev) => {
            map.insert(key, prev.sum(&m).unwrap());
        }
        None => {
            map.insert(key, m);
        }
    }
}

/// Largest eigenvalue of `Σ_k E_k*(1)`: the weight still circulating in the loop.
fn mass<'a>(maps: impl Iterator<Item = &'a KrausMap>, n: usize) -> f64 {
    let total = maps.fold(CMatrix::zeros(n, n), |acc, m| {
        &acc + &m.heisenberg_unit_image()
    });
    total
        .hermitian_eigenvalues(&Tolerance::uniform(1e-6))
        .map(|v| v.last().copied().unwrap_or(0.0))
        .unwrap_or_else(|_| total.max_abs())
}

/// One column of `Tr(f)`, obtained by pushing the input around the loop: the
/// exit part accumulates while the part still in `x` is fed back through `f`.
/// After `k` rounds the accumulated column equals that of the `(k+1)`-th
/// approximant of the whole-arrow iteration.
pub fn trace_column_forward(
    f: &QArrow,
    s: &Signature,
    t: &Signature,
    x: &Signature,
    j: &BlockKey,
    opts: &KleeneOptions,
) -> Result<(Column, ConvergenceInfo)> {
    check_sum(f, s, t, x)?;
    let src = SumLayout::new(s, x);
    let tgt = SumLayout::new(t, x);
    Ok(forward_column(f, &src, &tgt, j, s.block_dim(j)?, opts))
}

fn forward_column(
    f: &QArrow,
    src: &SumLayout,
    tgt: &SumLayout,
    j: &BlockKey,
    n: usize,
    opts: &KleeneOptions,
) -> (Column, ConvergenceInfo) {
    let eps = opts.tol.eps_fix;
    let mut acc = ColumnAcc::default();
    let mut frontier = BTreeMap::new();
    for (k, m) in f.column(&src.inject(Side::Left, j)).iter() {
        match tgt.split(k) {
            (Side::Left, kt) => acc.add(kt, m.clone()),
            (Side::Right, kx) => merge(&mut frontier, kx, m.clone()),
        }
    }
    let mut visited = BTreeSet::new();
    let mut info = ConvergenceInfo {
        iterations: 1,
        columns: 1,
        converged: false,
        ..ConvergenceInfo::default()
    };
    loop {
        let remaining = mass(frontier.values(), n);
        info.residual = remaining;
        if remaining <= eps {
            info.converged = true;
            break;
        }
        if info.iterations >= opts.max_iter {
            break;
        }
        let mut next = BTreeMap::new();
        let mut gained = Vec::new();
        for (kx, fin) in &frontier {
            visited.insert(kx.clone());
            for (k, g) in f.column(&src.inject(Side::Right, kx)).iter() {
                let step = KrausMap::compose(g, fin).unwrap();
                match tgt.split(k) {
                    (Side::Left, kt) => {
                        gained.push(step.clone());
                        acc.add(kt, step);
                    }
                    (Side::Right, kx2) => merge(&mut next, kx2, step),
                }
            }
        }
        info.iterations += 1;
        let stationary = next.len() == frontier.len()
            && next.iter().zip(&frontier).all(|((k1, a), (k2, b))| {
                k1 == k2 && a.choi_distance(b).is_ok_and(|d| d <= eps)
            });
        frontier = next;
        if stationary && mass(gained.iter(), n) <= eps {
            info.residual = 0.0;
            info.converged = true;
            break;
        }
    }
    info.visited_keys = visited.len();
    (acc.into_column(), info)
}

/// `Tr(f)` computed column by column with [`trace_column_forward`]. Columns of
/// a `nat` source are computed when first requested, and each records its
/// iteration count and the loop states it visited in the shared stats.
pub fn trace_forward(
    f: &QArrow,
    s: &Signature,
    t: &Signature,
    x: &Signature,
    opts: &KleeneOptions,
) -> Result<Traced> {
    check_sum(f, s, t, x)?;
    let stats = Arc::new(LoopStats::default());
    let src = SumLayout::new(s, x);
    let tgt = SumLayout::new(t, x);
    let (f, opts, s_sig, st) = (f.clone(), *opts, s.clone(), stats.clone());
    let arrow = QArrow::from_column_fn(s.clone(), t.clone(), move |j| {
        let n = s_sig.block_dim(j).unwrap();
        let (col, info) = forward_column(&f, &src, &tgt, j, n, &opts);
        st.record(&info);
        col
    });
    Ok(Traced { arrow, stats })
}

/// The Conway operator: for `g: x → a ⊕ x`, the least `h: x → a` with
/// `h = [id_a, h] ∘ g`, as the limit of `Fix^{n+1} = [id_a, Fix^n] ∘ g`.
pub fn fix(g: &QArrow, a: &Signature, x: &Signature, opts: &KleeneOptions) -> Result<Fixed> {
    let ax = Signature::direct_sum(a, x);
    if g.source() != x || *g.target() != ax {
        return Err(Error::SignatureMismatch(format!(
            "fix expects {x} -> {ax}, got {} -> {}",
            g.source(),
            g.target()
        )));
    }
    if !x.is_finite() {
        // Fix(g) = Tr(g ∘ ∇)
        let id = QArrow::identity(x);
        let codiag = QArrow::copair(&id, &id)?;
        return trace(&QArrow::compose(g, &codiag)?, x, a, x, opts);
    }
    let id_a = QArrow::identity(a);
    let step = |h: &QArrow| -> Result<QArrow> { QArrow::compose(&QArrow::copair(&id_a, h)?, g) };
    let (arrow, info) = kleene_finite(QArrow::zero_arrow(x, a), step, opts)?;
    let stats = Arc::new(LoopStats::default());
    stats.set(info);
    Ok(Fixed { arrow, stats })
}

fn kleene_finite(
    bottom: QArrow,
    step: impl Fn(&QArrow) -> Result<QArrow>,
    opts: &KleeneOptions,
) -> Result<(QArrow, ConvergenceInfo)> {
    let mut h = bottom;
    let mut info = ConvergenceInfo {
        converged: false,
        columns: h.source().num_blocks().unwrap_or(0),
        ..ConvergenceInfo::default()
    };
    for n in 1..=opts.max_iter {
        let next = step(&h)?;
        monotone_step(&h, &next, n, opts)?;
        let d = h.max_choi_distance(&next)?;
        info.iterations = n;
        info.residual = d;
        h = next;
        if d <= opts.tol.eps_fix {
            info.converged = true;
            break;
        }
    }
    Ok((h, info))
}

/// Least fixed point of a monotone functional on the hom-set `source → target`.
pub fn fix_functional<F>(
    source: &Signature,
    target: &Signature,
    functional: F,
    opts: &KleeneOptions,
) -> Result<Fixed>
where
    F: Fn(&QArrow) -> Result<QArrow> + Send + Sync + 'static,
{
    let (mut arrows, stats) = fix_functional_tuple(
        vec![(source.clone(), target.clone())],
        move |hs| Ok(vec![functional(&hs[0])?]),
        opts,
    )?;
    Ok(Fixed {
        arrow: arrows.pop().unwrap(),
        stats,
    })
}

type TupleFn = dyn Fn(&[QArrow]) -> Result<Vec<QArrow>> + Send + Sync;

/// Joint least fixed point of a functional on a product of hom-sets (mutual
/// recursion). `homs[c]` gives the endpoints of component `c`.
pub fn fix_functional_tuple<F>(
    homs: Vec<(Signature, Signature)>,
    functional: F,
    opts: &KleeneOptions,
) -> Result<(Vec<QArrow>, Arc<LoopStats>)>
where
    F: Fn(&[QArrow]) -> Result<Vec<QArrow>> + Send + Sync + 'static,
{
    let bottom: Vec<QArrow> = homs.iter().map(|(s, t)| QArrow::zero_arrow(s, t)).collect();
    let apply = |hs: &[QArrow]| -> Result<Vec<QArrow>> {
        let out = functional(hs)?;
        if out.len() != homs.len()
            || out
                .iter()
                .zip(&homs)
                .any(|(h, (s, t))| h.source() != s || h.target() != t)
        {
            return Err(Error::SignatureMismatch(
                "functional changes the endpoints of a component".into(),
            ));
        }
        Ok(out)
    };
    let first = apply(&bottom)?;
    let stats = Arc::new(LoopStats::default());

    if homs.iter().all(|(s, _)| s.is_finite()) {
        let mut h = bottom;
        let mut next = first;
        let mut info = ConvergenceInfo {
            converged: false,
            ..ConvergenceInfo::default()
        };
        for n in 1..=opts.max_iter {
            let mut d: f64 = 0.0;
            for (a, b) in h.iter().zip(&next) {
                monotone_step(a, b, n, opts)?;
                d = d.max(a.max_choi_distance(b)?);
            }
            info.iterations = n;
            info.residual = d;
            h = next;
            if d <= opts.tol.eps_fix {
                info.converged = true;
                break;
            }
            if n == opts.max_iter {
                break;
            }
            next = apply(&h)?;
        }
        info.columns = h.len();
        stats.set(info);
        return Ok((h, stats));
    }

    let lazy = Arc::new(LazyFix {
        functional: Box::new(functional),
        iterates: Mutex::new(vec![Arc::new(bottom), Arc::new(first)]),
    });
    let arrows = homs
        .iter()
        .enumerate()
        .map(|(c, (s, t))| {
            let (lazy, st, opts) = (lazy.clone(), stats.clone(), *opts);
            QArrow::from_column_fn(s.clone(), t.clone(), move |j| {
                let (col, info) = lazy.column(c, j, &opts);
                st.record(&info);
                col
            })
        })
        .collect();
    Ok((arrows, stats))
}

/// Iterates of a functional over arrows out of `nat`, built on demand. Each
/// column of the fixed point is iterated until it is nonzero and stable.
struct LazyFix {
    functional: Box<TupleFn>,
    iterates: Mutex<Vec<Arc<Vec<QArrow>>>>,
}

impl LazyFix {
    fn iterate(&self, n: usize) -> Arc<Vec<QArrow>> {
        loop {
            let (len, last) = {
                let it = self.iterates.lock().unwrap();
                if let Some(h) = it.get(n) {
                    return h.clone();
                }
                (it.len(), it.last().unwrap().clone())
            };
            let next = (self.functional)(&last).expect("functional succeeded on earlier iterates");
            let mut it = self.iterates.lock().unwrap();
            if it.len() == len {
                it.push(Arc::new(next));
            }
        }
    }

    fn column(&self, c: usize, j: &BlockKey, opts: &KleeneOptions) -> (Column, ConvergenceInfo) {
        let mut prev = self.iterate(0)[c].clone();
        let mut calm = 0;
        let mut info = ConvergenceInfo {
            converged: false,
            columns: 1,
            ..ConvergenceInfo::default()
        };
        for n in 1..=opts.max_iter {
            let h = self.iterate(n)[c].clone();
            let d = h.column_distance(&prev, j).unwrap_or(f64::INFINITY);
            info.iterations = n;
            info.residual = d;
            let nonzero = !h.column(j).is_empty();
            calm = if d <= opts.tol.eps_fix && nonzero { calm + 1 } else { 0 };
            prev = h;
            if calm >= 2 {
                info.converged = true;
                break;
            }
        }
        ((*prev.column(j)).clone(), info)
    }
}

/// Supremum of an ascending chain.
#[derive(Debug, Clone)]
pub struct LubResult {
    pub arrow: QArrow,
    pub converged: bool,
    /// Largest Choi-entry difference between the last two elements.
    pub residual: f64,
}

/// The supremum of a finite ascending chain of finite arrows: its last element,
/// flagged as converged once the last two elements agree within `eps_fix`.
pub fn lub_chain(chain: &[QArrow], tol: &Tolerance) -> Result<LubResult> {
    let last = chain
        .last()
        .ok_or_else(|| Error::Invalid("empty chain".into()))?;
    for (n, w) in chain.windows(2).enumerate() {
        let slack = QArrow::cp_leq_slack(&w[0], &w[1], tol)?;
        if slack < -tol.eps_psd {
            return Err(Error::NonMonotone {
                step: n + 1,
                min_eigenvalue: slack,
            });
        }
    }
    let residual = match chain {
        [.., a, b] => a.max_choi_distance(b)?,
        _ => 0.0,
    };
    Ok(LubResult {
        arrow: last.clone(),
        converged: residual <= tol.eps_fix,
        residual,
    })
}
