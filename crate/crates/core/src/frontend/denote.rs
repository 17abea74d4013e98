use std::collections::BTreeMap;
use std::sync::Arc;

use super::ast::{Expr, Pos, ProcDef, Program, Stmt, StmtKind, Type};
use super::gates::GateTable;
use super::typecheck::{call_output, expr_type, typecheck, Context, ProcTyping, Typing};
use crate::classical::{builtin, classical_arrow};
use crate::error::{Error, Result};
use crate::qcat::{
    discard_qbit, fix_functional_tuple, qbit_structure, trace, unitary_lift, ConvergenceInfo,
    EffectVector, KleeneOptions, LoopStats, QArrow, StateVector, TraceIter,
};
use crate::signature::{Side, Signature};

#[derive(Debug, Clone, Copy, Default)]
pub struct DenoteOptions {
    pub kleene: KleeneOptions,
    /// Replace every loop by its `n`-th approximant (body unrolled, then
    /// aborted) and every recursion by `n` unfoldings.
    pub loop_unroll: Option<usize>,
}

/// Convergence record of one loop or of the procedure fixed point.
#[derive(Debug, Clone)]
pub struct LoopRecord {
    pub label: String,
    pub stats: Arc<LoopStats>,
}

/// A program's meaning: an arrow from the input context to the output context.
#[derive(Debug, Clone)]
pub struct Denotation {
    pub arrow: QArrow,
    pub typing: Typing,
    pub loops: Vec<LoopRecord>,
}

impl Denotation {
    pub fn input(&self) -> &Context {
        &self.typing.input
    }

    pub fn output(&self) -> &Context {
        &self.typing.output
    }

    pub fn convergence(&self) -> Vec<(String, ConvergenceInfo)> {
        self.loops
            .iter()
            .map(|l| (l.label.clone(), l.stats.snapshot()))
            .collect()
    }

    pub fn converged(&self) -> bool {
        self.loops.iter().all(|l| l.stats.snapshot().converged)
    }

    /// Schrödinger picture.
    pub fn run(&self, input: &StateVector) -> Result<StateVector> {
        input.apply(&self.arrow)
    }

    /// Heisenberg picture: the weakest precondition of `post`.
    pub fn wp(&self, post: &EffectVector) -> Result<EffectVector> {
        post.wp(&self.arrow)
    }
}

pub fn denote(program: &Program, gates: &GateTable, opts: &DenoteOptions) -> Result<Denotation> {
    let typing = typecheck(program)?;
    let mut loops = Vec::new();
    let procs = denote_procs(program, &typing, gates, opts, &mut loops)?;
    let mut d = Denoter {
        gates,
        procs: &procs,
        opts,
        loops,
    };
    let (arrow, out) = d.stmt(&program.body, &typing.input)?;
    debug_assert_eq!(out, typing.output);
    Ok(Denotation {
        arrow,
        typing,
        loops: d.loops,
    })
}

pub fn run(program: &Program, gates: &GateTable, input: &StateVector, opts: &DenoteOptions) -> Result<StateVector> {
    denote(program, gates, opts)?.run(input)
}

pub fn wp_run(program: &Program, gates: &GateTable, post: &EffectVector, opts: &DenoteOptions) -> Result<EffectVector> {
    denote(program, gates, opts)?.wp(post)
}

type ProcEnv = BTreeMap<String, (ProcTyping, QArrow)>;

fn proc_env(typing: &BTreeMap<String, ProcTyping>, defs: &[ProcDef], arrows: &[QArrow]) -> ProcEnv {
    defs.iter()
        .zip(arrows)
        .map(|(p, a)| (p.name.clone(), (typing[&p.name].clone(), a.clone())))
        .collect()
}

/// All procedures at once, as the least fixed point of the functional that
/// denotes every body against the current approximations.
fn denote_procs(
    program: &Program,
    typing: &Typing,
    gates: &GateTable,
    opts: &DenoteOptions,
    loops: &mut Vec<LoopRecord>,
) -> Result<ProcEnv> {
    if program.procs.is_empty() {
        return Ok(ProcEnv::new());
    }
    let defs = Arc::new(program.procs.clone());
    let ptyping = Arc::new(typing.procs.clone());
    let homs: Vec<(Signature, Signature)> = defs
        .iter()
        .map(|p| {
            let t = &ptyping[&p.name];
            (t.input.signature(), t.output.signature())
        })
        .collect();
    let functional = {
        let (defs, ptyping, gates, opts) = (defs.clone(), ptyping.clone(), gates.clone(), *opts);
        move |hs: &[QArrow]| -> Result<Vec<QArrow>> {
            let env = proc_env(&ptyping, &defs, hs);
            let mut d = Denoter {
                gates: &gates,
                procs: &env,
                opts: &opts,
                loops: Vec::new(),
            };
            defs.iter()
                .map(|p| {
                    let t = &ptyping[&p.name];
                    let (body, out) = d.stmt(&p.body, &t.input)?;
                    QArrow::compose(&reorder(&out, &t.output)?, &body)
                })
                .collect()
        }
    };
    let (arrows, stats) = match opts.loop_unroll {
        Some(n) => {
            let mut hs: Vec<QArrow> = homs.iter().map(|(s, t)| QArrow::zero_arrow(s, t)).collect();
            for _ in 0..n {
                hs = functional(&hs)?;
            }
            (hs, unrolled(n))
        }
        None => fix_functional_tuple(homs, functional, &opts.kleene)?,
    };
    loops.push(LoopRecord {
        label: "procedures".into(),
        stats,
    });
    Ok(proc_env(&ptyping, &defs, &arrows))
}

/// Symmetry taking `from` to the variable order of `to`.
fn reorder(from: &Context, to: &Context) -> Result<QArrow> {
    let order: Vec<usize> = to
        .vars
        .iter()
        .map(|(n, _)| from.index(n).expect("contexts hold the same variables"))
        .collect();
    permute(from, &order)
}

fn permute(from: &Context, order: &[usize]) -> Result<QArrow> {
    if order.iter().enumerate().all(|(i, &p)| i == p) {
        return Ok(QArrow::identity(&from.signature()));
    }
    QArrow::symmetry(&from.components(), order)
}

/// Moves `names` to the end of the context, in the given order.
fn focus(ctx: &Context, names: &[String]) -> Result<(QArrow, Context)> {
    let picked: Vec<usize> = names.iter().map(|n| ctx.index(n).unwrap()).collect();
    let order: Vec<usize> = (0..ctx.len())
        .filter(|i| !picked.contains(i))
        .chain(picked.iter().copied())
        .collect();
    let moved = Context::new(order.iter().map(|&i| ctx.vars[i].clone()).collect());
    Ok((permute(ctx, &order)?, moved))
}

/// The first `len - k` variables.
fn rest(ctx: &Context, k: usize) -> Context {
    Context::new(ctx.vars[..ctx.len() - k].to_vec())
}

/// `id_rest ⊗ op`.
fn on_tail(rest: &Context, op: &QArrow) -> QArrow {
    QArrow::tensor(&QArrow::identity(&rest.signature()), op)
}

fn point(ty: Type, v: usize) -> Result<QArrow> {
    match ty.classical() {
        Some(c) => classical_arrow(&[], &[c], move |_| vec![v]),
        None => {
            let (_, iota, _) = qbit_structure();
            QArrow::compose(&iota, &point(Type::Bit, v)?)
        }
    }
}

fn discard(ty: Type) -> Result<QArrow> {
    match ty.classical() {
        Some(c) => classical_arrow(&[c], &[], |_| vec![]),
        None => Ok(discard_qbit()),
    }
}

fn unrolled(n: usize) -> Arc<LoopStats> {
    let stats = Arc::new(LoopStats::default());
    stats.set(ConvergenceInfo {
        iterations: n,
        converged: false,
        ..ConvergenceInfo::default()
    });
    stats
}

fn type_err(pos: Pos, msg: impl std::fmt::Display) -> Error {
    Error::Type(format!("{pos}: {msg}"))
}

struct Denoter<'a> {
    gates: &'a GateTable,
    procs: &'a ProcEnv,
    opts: &'a DenoteOptions,
    loops: Vec<LoopRecord>,
}

impl Denoter<'_> {
    fn stmt(&mut self, s: &Stmt, ctx: &Context) -> Result<(QArrow, Context)> {
        let pos = s.pos;
        match &s.kind {
            StmtKind::Skip => Ok((QArrow::identity(&ctx.signature()), ctx.clone())),
            StmtKind::Seq(v) => {
                let mut arrow = QArrow::identity(&ctx.signature());
                let mut c = ctx.clone();
                for t in v {
                    let (a, next) = self.stmt(t, &c)?;
                    arrow = QArrow::compose(&a, &arrow)?;
                    c = next;
                }
                Ok((arrow, c))
            }
            StmtKind::New { ty, var } => {
                let mut out = ctx.clone();
                out.vars.push((var.clone(), *ty));
                Ok((on_tail(ctx, &point(*ty, 0)?), out))
            }
            StmtKind::Discard { var } => self.discard(ctx, var),
            StmtKind::Apply { gate, args, .. } => {
                let u = self
                    .gates
                    .get(gate)
                    .ok_or_else(|| type_err(pos, format!("unknown gate `{gate}`")))?;
                let arity = self.gates.arity(gate).unwrap();
                if arity != args.len() {
                    return Err(type_err(
                        pos,
                        format!("gate `{gate}` acts on {arity} qbits but is applied to {}", args.len()),
                    ));
                }
                let (to, moved) = focus(ctx, args)?;
                let lift = unitary_lift(u, &self.opts.kleene.tol)?;
                let arrow = QArrow::chain(&[
                    to,
                    on_tail(&rest(&moved, args.len()), &lift),
                    reorder(&moved, ctx)?,
                ])?;
                Ok((arrow, ctx.clone()))
            }
            StmtKind::Assign { target, expr } => self.assign(ctx, target, expr, pos),
            StmtKind::Measure {
                var,
                then_branch,
                else_branch,
            } => {
                let (to, moved) = focus(ctx, std::slice::from_ref(var))?;
                let (_, _, p) = qbit_structure();
                let mut measured = ctx.clone();
                measured.vars[ctx.index(var).unwrap()].1 = Type::Bit;
                let mut moved_b = moved.clone();
                moved_b.vars.last_mut().unwrap().1 = Type::Bit;
                let m = QArrow::chain(&[to, on_tail(&rest(&moved, 1), &p), reorder(&moved_b, &measured)?])?;
                let (cases, out) = self.cases(&measured, var, then_branch, else_branch)?;
                Ok((QArrow::compose(&cases, &m)?, out))
            }
            StmtKind::If {
                var,
                then_branch,
                else_branch,
            } => self.cases(ctx, var, then_branch, else_branch),
            StmtKind::While { var, body } => self.while_loop(ctx, var, body, pos),
            StmtKind::Call { name, args } => {
                let (pt, arrow) = &self.procs[name];
                let (to, moved) = focus(ctx, args)?;
                let out = call_output(ctx, &pt.input, &pt.output, args);
                Ok((QArrow::compose(&on_tail(&rest(&moved, args.len()), arrow), &to)?, out))
            }
        }
    }

    fn discard(&self, ctx: &Context, var: &str) -> Result<(QArrow, Context)> {
        let (to, moved) = focus(ctx, &[var.to_string()])?;
        let ty = ctx.get(var).unwrap();
        let kept = rest(&moved, 1);
        Ok((QArrow::compose(&on_tail(&kept, &discard(ty)?), &to)?, kept))
    }

    fn assign(&mut self, ctx: &Context, target: &str, expr: &Expr, pos: Pos) -> Result<(QArrow, Context)> {
        let current = ctx.get(target);
        let ty = expr_type(ctx, current, expr, pos)?;
        let (reads, eval): (Vec<String>, Arc<dyn Fn(&[usize]) -> usize + Send + Sync>) = match expr {
            Expr::Lit(n) => {
                let n = *n;
                (vec![], Arc::new(move |_| n))
            }
            Expr::Var(v) => (vec![v.clone()], Arc::new(|a| a[0])),
            Expr::Call { func, args } => {
                let b = builtin(func).unwrap();
                (args.clone(), Arc::new(move |a| b.eval(a)))
            }
        };
        let mut uniq: Vec<String> = Vec::new();
        for r in &reads {
            if !uniq.contains(r) {
                uniq.push(r.clone());
            }
        }
        let slots: Vec<usize> = reads.iter().map(|r| uniq.iter().position(|u| u == r).unwrap()).collect();
        let in_types: Vec<_> = uniq.iter().map(|u| ctx.get(u).unwrap().classical().unwrap()).collect();
        let mut out_types = in_types.clone();
        out_types.push(ty.classical().unwrap());
        let op = classical_arrow(&in_types, &out_types, move |vals| {
            let argv: Vec<usize> = slots.iter().map(|&s| vals[s]).collect();
            let mut v = vals.to_vec();
            v.push(eval(&argv));
            v
        })?;
        let (to, moved) = focus(ctx, &uniq)?;
        const FRESH: &str = "%value";
        let mut computed = moved.clone();
        computed.vars.push((FRESH.to_string(), ty));
        let mut arrow = QArrow::compose(&on_tail(&rest(&moved, uniq.len()), &op), &to)?;
        let mut target_ctx = ctx.clone();
        if current.is_some() {
            let (d, c) = self.discard(&computed, target)?;
            arrow = QArrow::compose(&d, &arrow)?;
            computed = c;
        } else {
            target_ctx.vars.push((target.to_string(), ty));
        }
        let slot = computed.index(FRESH).unwrap();
        computed.vars[slot].0 = target.to_string();
        let arrow = QArrow::compose(&reorder(&computed, &target_ctx)?, &arrow)?;
        Ok((arrow, target_ctx))
    }

    /// Arm `v` of a case split on bit `var`: re-creates `var = v` on the
    /// remaining context, runs the branch and brings the result to `out`.
    fn cases(&mut self, ctx: &Context, var: &str, then_b: &Stmt, else_b: &Stmt) -> Result<(QArrow, Context)> {
        let (to, moved) = focus(ctx, &[var.to_string()])?;
        let kept = rest(&moved, 1);
        let (a1, o1) = self.stmt(then_b, ctx)?;
        let (a0, o0) = self.stmt(else_b, ctx)?;
        let restore = |v: usize| -> Result<QArrow> {
            QArrow::compose(&reorder(&moved, ctx)?, &on_tail(&kept, &point(Type::Bit, v)?))
        };
        let arm0 = QArrow::chain(&[restore(0)?, a0, reorder(&o0, &o1)?])?;
        let arm1 = QArrow::chain(&[restore(1)?, a1])?;
        let b = QArrow::branch(&kept.signature(), &[arm0, arm1])?;
        Ok((QArrow::compose(&b, &to)?, o1))
    }

    /// `while b do body` is the trace of `[h, h]: Γ ⊕ Γ → Γ ⊕ Γ`, where `h`
    /// sends `b = 0` to the exit summand and runs the body on `b = 1`.
    fn while_loop(&mut self, ctx: &Context, var: &str, body: &Stmt, pos: Pos) -> Result<(QArrow, Context)> {
        let g = ctx.signature();
        let (to, moved) = focus(ctx, &[var.to_string()])?;
        let kept = rest(&moved, 1);
        let (a, out) = self.stmt(body, ctx)?;
        let restore = |v: usize| -> Result<QArrow> {
            QArrow::compose(&reorder(&moved, ctx)?, &on_tail(&kept, &point(Type::Bit, v)?))
        };
        let exit = QArrow::compose(&QArrow::injection(&g, &g, Side::Left), &restore(0)?)?;
        let again = QArrow::chain(&[restore(1)?, a, reorder(&out, ctx)?, QArrow::injection(&g, &g, Side::Right)])?;
        let h = QArrow::compose(&QArrow::branch(&kept.signature(), &[exit, again])?, &to)?;
        let f = QArrow::copair(&h, &h)?;
        let label = format!("while {var} at {pos}");
        let (arrow, stats) = match self.opts.loop_unroll {
            Some(n) => {
                let mut it = TraceIter::new(&f, &g, &g, &g)?;
                for _ in 0..n {
                    it.step()?;
                }
                (it.approximant()?, unrolled(n))
            }
            None => {
                let t = trace(&f, &g, &g, &g, &self.opts.kleene)?;
                (t.arrow, t.stats)
            }
        };
        self.loops.push(LoopRecord { label, stats });
        Ok((arrow, ctx.clone()))
    }
}
