use std::collections::BTreeMap;
use std::fmt;

use super::ast::{Expr, Param, Pos, Program, Stmt, StmtKind, Type};
use crate::classical::{builtin, ClassicalType};
use crate::error::{Error, Result};
use crate::signature::Signature;

impl Type {
    pub fn signature(self) -> Signature {
        match self {
            Type::Bit => Signature::bit(),
            Type::Qbit => Signature::qbit(),
            Type::Nat => Signature::nat(),
        }
    }

    pub(crate) fn classical(self) -> Option<ClassicalType> {
        match self {
            Type::Bit => Some(ClassicalType::BIT),
            Type::Nat => Some(ClassicalType::Nat),
            Type::Qbit => None,
        }
    }

    fn from_classical(t: ClassicalType) -> Type {
        match t {
            ClassicalType::Nat => Type::Nat,
            _ => Type::Bit,
        }
    }
}

/// Ordered typing context. Its signature is the left-to-right tensor of the
/// component types.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Context {
    pub vars: Vec<(String, Type)>,
}

impl Context {
    pub fn new(vars: Vec<(String, Type)>) -> Self {
        Context { vars }
    }

    pub fn from_params(ps: &[Param]) -> Self {
        Context::new(ps.iter().map(|p| (p.name.clone(), p.ty)).collect())
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<Type> {
        self.index(name).map(|i| self.vars[i].1)
    }

    pub fn names(&self) -> Vec<&str> {
        self.vars.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn components(&self) -> Vec<Signature> {
        self.vars.iter().map(|(_, t)| t.signature()).collect()
    }

    pub fn signature(&self) -> Signature {
        Signature::tensor_all(&self.components())
    }

    /// Same variables with the same types, in any order.
    pub fn same_vars(&self, other: &Context) -> bool {
        self.len() == other.len() && self.vars.iter().all(|(n, t)| other.get(n) == Some(*t))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (n, t)) in self.vars.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}:{t}")?;
        }
        write!(f, ")")
    }
}

/// Contexts before and after one statement.
#[derive(Debug, Clone, PartialEq)]
pub struct StmtTyping {
    pub pos: Pos,
    pub kind: &'static str,
    pub input: Context,
    pub output: Context,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcTyping {
    pub input: Context,
    pub output: Context,
}

/// Result of checking a program: the main body's contexts, the procedure
/// interfaces, and one entry per statement in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct Typing {
    pub input: Context,
    pub output: Context,
    pub procs: BTreeMap<String, ProcTyping>,
    pub statements: Vec<StmtTyping>,
}

fn type_err(pos: Pos, msg: impl fmt::Display) -> Error {
    Error::Type(format!("{pos}: {msg}"))
}

pub fn typecheck(program: &Program) -> Result<Typing> {
    let mut procs = BTreeMap::new();
    for p in &program.procs {
        check_distinct(&p.params, p.pos, "parameter")?;
        check_distinct(p.results(), p.pos, "result")?;
        let entry = ProcTyping {
            input: Context::from_params(&p.params),
            output: Context::from_params(p.results()),
        };
        if procs.insert(p.name.clone(), entry).is_some() {
            return Err(type_err(p.pos, format!("procedure `{}` is defined twice", p.name)));
        }
    }
    check_distinct(&program.input, Pos { line: 1, col: 1 }, "input")?;
    let mut checker = Checker {
        procs: &procs,
        statements: Vec::new(),
    };
    for p in &program.procs {
        let pt = &procs[&p.name];
        let out = checker.stmt(&p.body, &pt.input)?;
        if !out.same_vars(&pt.output) {
            return Err(type_err(
                p.pos,
                format!("procedure `{}` ends with {out} but declares {}", p.name, pt.output),
            ));
        }
    }
    let input = Context::from_params(&program.input);
    let output = checker.stmt(&program.body, &input)?;
    let statements = checker.statements;
    Ok(Typing {
        input,
        output,
        procs,
        statements,
    })
}

fn check_distinct(ps: &[Param], pos: Pos, what: &str) -> Result<()> {
    for (i, p) in ps.iter().enumerate() {
        if ps[..i].iter().any(|q| q.name == p.name) {
            return Err(type_err(pos, format!("{what} `{}` is declared twice", p.name)));
        }
    }
    Ok(())
}

struct Checker<'a> {
    procs: &'a BTreeMap<String, ProcTyping>,
    statements: Vec<StmtTyping>,
}

fn lookup(ctx: &Context, name: &str, pos: Pos) -> Result<Type> {
    ctx.get(name)
        .ok_or_else(|| type_err(pos, format!("variable `{name}` is not bound in {ctx}")))
}

fn distinct(args: &[String], pos: Pos) -> Result<()> {
    for (i, a) in args.iter().enumerate() {
        if args[..i].contains(a) {
            return Err(type_err(pos, format!("variable `{a}` is used twice; qbits cannot be copied")));
        }
    }
    Ok(())
}

/// Type of a classical expression, given the context it reads from.
pub(crate) fn expr_type(ctx: &Context, target: Option<Type>, e: &Expr, pos: Pos) -> Result<Type> {
    match e {
        Expr::Lit(n) => {
            let t = target.unwrap_or(Type::Nat);
            if t == Type::Bit && *n > 1 {
                return Err(type_err(pos, format!("literal {n} is not a bit")));
            }
            Ok(t)
        }
        Expr::Var(v) => {
            let t = lookup(ctx, v, pos)?;
            if !t.is_classical() {
                return Err(type_err(pos, format!("cannot copy qbit `{v}`")));
            }
            Ok(t)
        }
        Expr::Call { func, args } => {
            let b = builtin(func)
                .ok_or_else(|| type_err(pos, format!("unknown classical function `{func}`")))?;
            if b.inputs.len() != args.len() {
                return Err(type_err(
                    pos,
                    format!("`{func}` takes {} arguments, got {}", b.inputs.len(), args.len()),
                ));
            }
            for (a, want) in args.iter().zip(&b.inputs) {
                let t = lookup(ctx, a, pos)?;
                if t.classical() != Some(*want) {
                    return Err(type_err(pos, format!("argument `{a}` of `{func}` has type {t}, expected {want}")));
                }
            }
            Ok(Type::from_classical(b.output))
        }
    }
}

/// Context after a call: arguments are consumed, results are appended. A
/// result named like a parameter comes back under the caller's argument name.
pub(crate) fn call_output(ctx: &Context, proc_in: &Context, proc_out: &Context, args: &[String]) -> Context {
    let mut vars: Vec<(String, Type)> =
        ctx.vars.iter().filter(|(n, _)| !args.contains(n)).cloned().collect();
    for (name, t) in &proc_out.vars {
        let caller = match proc_in.index(name) {
            Some(i) => args[i].clone(),
            None => name.clone(),
        };
        vars.push((caller, *t));
    }
    Context::new(vars)
}

impl Checker<'_> {
    fn stmt(&mut self, s: &Stmt, ctx: &Context) -> Result<Context> {
        let slot = self.statements.len();
        self.statements.push(StmtTyping {
            pos: s.pos,
            kind: s.describe(),
            input: ctx.clone(),
            output: Context::default(),
        });
        let pos = s.pos;
        let out = match &s.kind {
            StmtKind::Skip => ctx.clone(),
            StmtKind::Seq(v) => {
                let mut c = ctx.clone();
                for t in v {
                    c = self.stmt(t, &c)?;
                }
                c
            }
            StmtKind::New { ty, var } => {
                if ctx.get(var).is_some() {
                    return Err(type_err(pos, format!("variable `{var}` is already bound")));
                }
                let mut c = ctx.clone();
                c.vars.push((var.clone(), *ty));
                c
            }
            StmtKind::Discard { var } => {
                let i = ctx
                    .index(var)
                    .ok_or_else(|| type_err(pos, format!("cannot discard unbound variable `{var}`")))?;
                let mut c = ctx.clone();
                c.vars.remove(i);
                c
            }
            StmtKind::Apply { target, gate, args } => {
                for a in args.iter().chain([target]) {
                    if lookup(ctx, a, pos)? != Type::Qbit {
                        return Err(type_err(pos, format!("gate `{gate}` applied to non-qbit `{a}`")));
                    }
                }
                if !args.contains(target) {
                    return Err(type_err(pos, format!("`{target}` is not an argument of `{gate}`")));
                }
                distinct(args, pos)?;
                ctx.clone()
            }
            StmtKind::Assign { target, expr } => {
                let current = ctx.get(target);
                if current == Some(Type::Qbit) {
                    return Err(type_err(pos, format!("cannot assign to qbit `{target}`")));
                }
                let t = expr_type(ctx, current, expr, pos)?;
                match current {
                    Some(c) if c != t => {
                        return Err(type_err(pos, format!("`{target}` has type {c} but the value has type {t}")));
                    }
                    Some(_) => ctx.clone(),
                    None => {
                        let mut c = ctx.clone();
                        c.vars.push((target.clone(), t));
                        c
                    }
                }
            }
            StmtKind::Measure {
                var,
                then_branch,
                else_branch,
            } => {
                if lookup(ctx, var, pos)? != Type::Qbit {
                    return Err(type_err(pos, format!("cannot measure non-qbit `{var}`")));
                }
                let mut c = ctx.clone();
                c.vars[ctx.index(var).unwrap()].1 = Type::Bit;
                self.branches(&c, then_branch, else_branch, pos)?
            }
            StmtKind::If {
                var,
                then_branch,
                else_branch,
            } => {
                if lookup(ctx, var, pos)? != Type::Bit {
                    return Err(type_err(pos, format!("condition `{var}` is not a bit")));
                }
                self.branches(ctx, then_branch, else_branch, pos)?
            }
            StmtKind::While { var, body } => {
                if lookup(ctx, var, pos)? != Type::Bit {
                    return Err(type_err(pos, format!("loop condition `{var}` is not a bit")));
                }
                let out = self.stmt(body, ctx)?;
                if !out.same_vars(ctx) {
                    return Err(type_err(pos, format!("loop body changes the context from {ctx} to {out}")));
                }
                ctx.clone()
            }
            StmtKind::Call { name, args } => {
                let p = self
                    .procs
                    .get(name)
                    .ok_or_else(|| type_err(pos, format!("unknown procedure `{name}`")))?;
                if p.input.len() != args.len() {
                    return Err(type_err(
                        pos,
                        format!("`{name}` takes {} arguments, got {}", p.input.len(), args.len()),
                    ));
                }
                distinct(args, pos)?;
                for (a, (pn, want)) in args.iter().zip(&p.input.vars) {
                    let t = lookup(ctx, a, pos)?;
                    if t != *want {
                        return Err(type_err(pos, format!("argument `{a}` has type {t}, but `{pn}` expects {want}")));
                    }
                }
                let out = call_output(ctx, &p.input, &p.output, args);
                for (i, (n, _)) in out.vars.iter().enumerate() {
                    if out.vars[..i].iter().any(|(m, _)| m == n) {
                        return Err(type_err(pos, format!("result `{n}` of `{name}` clashes with a bound variable")));
                    }
                }
                out
            }
        };
        self.statements[slot].output = out.clone();
        Ok(out)
    }

    fn branches(&mut self, ctx: &Context, a: &Stmt, b: &Stmt, pos: Pos) -> Result<Context> {
        let oa = self.stmt(a, ctx)?;
        let ob = self.stmt(b, ctx)?;
        if !oa.same_vars(&ob) {
            return Err(type_err(pos, format!("branches end in different contexts {oa} and {ob}")));
        }
        Ok(oa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse_program;

    fn check(src: &str) -> Result<Typing> {
        typecheck(&parse_program(src).unwrap())
    }

    #[test]
    fn new_qbit_extends_the_context() {
        let t = check("new qbit q").unwrap();
        assert_eq!(t.input.signature(), Signature::unit());
        assert_eq!(t.output.to_string(), "(q:qbit)");
        assert_eq!(t.output.signature(), Signature::qbit());
    }

    #[test]
    fn bit_then_qbit_context_has_two_qubit_blocks() {
        let t = check("input (b: bit, q: qbit); skip").unwrap();
        assert_eq!(t.input.signature(), Signature::finite(vec![2, 2]).unwrap());
    }

    #[test]
    fn every_statement_is_annotated() {
        let t = check("new qbit q; q *= H(q); measure q then {skip} else {skip}").unwrap();
        let kinds: Vec<_> = t.statements.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, ["sequence", "new", "unitary", "measure", "skip", "skip"]);
        let m = &t.statements[3];
        assert_eq!(m.input.to_string(), "(q:qbit)");
        assert_eq!(m.output.to_string(), "(q:bit)");
        assert_eq!(t.statements[4].input.to_string(), "(q:bit)");
    }

    #[test]
    fn scoping_and_linearity_errors() {
        let cases = [
            ("new qbit q; q *= H(q); q *= H(p)", "not bound"),
            ("new qbit q; new bit q", "already bound"),
            ("new qbit q; discard q; q *= H(q)", "not bound"),
            ("new qbit q; q *= CNOT(q, q)", "used twice"),
            ("new qbit q; x := q", "cannot copy"),
            ("new bit b; new qbit q; if b { discard q } else { skip }", "different contexts"),
            ("new bit b; while b do { new bit c }", "changes the context"),
            ("new bit b; measure b then {} else {}", "non-qbit"),
            ("new nat n; while n do {}", "not a bit"),
            ("new bit b; b := 2", "not a bit"),
            ("call nope()", "unknown procedure"),
            ("n := frob(m)", "unknown classical"),
        ];
        for (src, needle) in cases {
            let err = check(src).unwrap_err().to_string();
            assert!(err.contains(needle), "{src}: {err}");
        }
    }

    #[test]
    fn procedures_have_interfaces() {
        let t = check(
            "proc coin() -> (r: bit) { new qbit q; q *= H(q); measure q then {} else {}; r := q; discard q }
             proc flip(b: bit) { b := not(b) }
             call coin(); call flip(r)",
        )
        .unwrap();
        assert_eq!(t.output.to_string(), "(r:bit)");
        assert_eq!(t.procs["flip"].output.to_string(), "(b:bit)");
        let err = check("proc f(x: qbit) -> (x: bit) { skip } skip").unwrap_err();
        assert!(err.to_string().contains("declares"), "{err}");
    }

    #[test]
    fn measure_rebinds_as_bit_in_both_branches() {
        let t = check("input (q: qbit); measure q then { q := not(q) } else { skip }").unwrap();
        assert_eq!(t.output.to_string(), "(q:bit)");
    }
}
