//! The `qpl` command line: `run`, `check` and `demo`.
//!
//! Reports are JSON on standard output; diagnostics go to standard error.
//! Exit codes: 0 success, 2 user error, 3 non-convergence under `--strict`,
//! 4 invariant violation. `QPL_TOL` and `QPL_FIX_TOL` override the default
//! tolerances; explicit flags win over both.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frontend::{compile, programs, DenoteOptions, Denotation, GateTable};
use crate::matrix::{CMatrix, Tolerance};
use crate::qcat::{ArrowDump, ConvergenceInfo, EffectVector, KleeneOptions, QArrow, StateVector};
use crate::random;
use crate::signature::{BlockKey, Signature};

#[derive(Parser, Debug)]
#[command(name = "qpl", version, about = "Run and verify quantum programs through their CP-map semantics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a program in the state picture, the effect picture, or both.
    Run(RunArgs),
    /// Verify the invariants of a program's denotation or of an arrow dump.
    Check(CheckArgs),
    /// Run a bundled program and compare it with its closed form.
    Demo(DemoArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Positivity and equality tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed-point convergence tolerance.
    #[arg(long)]
    pub fix_tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Exit with code 3 when a loop or recursion did not converge.
    #[arg(long)]
    pub strict: bool,
    /// Record wall time in the report.
    #[arg(long)]
    pub timing: bool,
    /// JSON file with extra gates.
    #[arg(long)]
    pub gates: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for sampled checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Picture {
    Schrodinger,
    Heisenberg,
    Both,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub file: PathBuf,
    /// Input state, e.g. `0:0.5;1:0.5` or `0:[[1,0],[0,0]]`. Defaults to the
    /// unit state for programs without inputs.
    #[arg(long)]
    pub input: Option<String>,
    /// Post-condition effect in the same format. Defaults to the unit effect
    /// (on the reached blocks when the output contains `nat`).
    #[arg(long)]
    pub effect: Option<String>,
    #[arg(long, value_enum, default_value_t = Picture::Schrodinger)]
    pub picture: Picture,
    /// Unroll loops and recursion this many times instead of iterating to convergence.
    #[arg(long)]
    pub unroll: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Program to check.
    #[arg(required_unless_present = "arrow", conflicts_with = "arrow")]
    pub file: Option<PathBuf>,
    /// Arrow dump (JSON) to check instead of a program.
    #[arg(long)]
    pub arrow: Option<PathBuf>,
    /// Random state/effect pairs for the duality check.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoName {
    Teleport,
    Coin,
    NatAdd,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub name: DemoName,
    #[command(flatten)]
    pub common: Common,
}

/// One block of a state or effect in a report.
#[derive(Debug, Clone, Serialize)]
pub struct BlockEntry {
    pub key: String,
    pub trace: f64,
    pub matrix: CMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    pub label: String,
    #[serde(flatten)]
    pub info: ConvergenceInfo,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub description: String,
    pub max_error: f64,
    pub threshold: f64,
    pub passed: bool,
    /// `(index, observed, expected)` rows, when the expectation is a table.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub program: String,
    pub input: String,
    pub input_signature: String,
    pub output_signature: String,
    pub pictures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_state: Option<Vec<BlockEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_effect: Option<Vec<BlockEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precondition: Option<Vec<BlockEntry>>,
    pub loops: Vec<LoopReport>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub subject: String,
    pub source: String,
    pub target: String,
    pub columns_checked: usize,
    pub blocks_checked: usize,
    pub min_choi_eigenvalue: f64,
    pub completely_positive: bool,
    pub trace_nonincreasing: bool,
    /// `None` when the dump could not be rebuilt into an arrow.
    pub subunital_after_dualize: Option<bool>,
    pub duality_samples: usize,
    pub max_duality_residual: f64,
    pub converged: bool,
    pub issues: Vec<String>,
    pub ok: bool,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn user(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

fn fail_from(context: &str, e: Error) -> Failure {
    let code = match e {
        Error::Invariant(_) | Error::NonMonotone { .. } => 4,
        _ => 2,
    };
    let message = if context.is_empty() {
        e.to_string()
    } else {
        format!("{context}:{e}")
    };
    Failure { code, message }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok((json, code)) => {
            // a closed pipe is not an error of the command
            let _ = writeln!(std::io::stdout(), "{json}");
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs a command, returning the JSON report and the exit code.
pub fn execute(cmd: &Command) -> Result<(String, i32), Failure> {
    let (json, code, out) = match cmd {
        Command::Run(a) => {
            let r = cmd_run(a)?;
            let code = strict_code(&a.common, r.converged);
            (to_json(&r), code, &a.common.out)
        }
        Command::Check(a) => {
            let r = cmd_check(a)?;
            let code = if !r.ok {
                4
            } else {
                strict_code(&a.common, r.converged)
            };
            (to_json(&r), code, &a.common.out)
        }
        Command::Demo(a) => {
            let r = cmd_demo(a.name, &a.common)?;
            let code = match &r.comparison {
                Some(c) if !c.passed => 4,
                _ => strict_code(&a.common, r.converged),
            };
            (to_json(&r), code, &a.common.out)
        }
    };
    if let Some(path) = out {
        std::fs::write(path, &json).map_err(|e| Failure::user(format!("{}: {e}", path.display())))?;
    }
    Ok((json, code))
}

fn strict_code(c: &Common, converged: bool) -> i32 {
    if c.strict && !converged {
        3
    } else {
        0
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn env_f64(name: &str) -> Result<Option<f64>, Failure> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::user(format!("{name}={v:?} is not a number"))),
        Err(_) => Ok(None),
    }
}

/// Tolerances: defaults, then environment, then flags.
pub fn tolerance(c: &Common) -> Result<Tolerance, Failure> {
    let d = Tolerance::default();
    let eps = c.tol.or(env_f64("QPL_TOL")?).unwrap_or(d.eps_eq);
    let fix = c.fix_tol.or(env_f64("QPL_FIX_TOL")?).unwrap_or(d.eps_fix);
    Tolerance::new(eps, eps, fix).map_err(|e| Failure::user(e.to_string()))
}

fn options(c: &Common, unroll: Option<usize>) -> Result<DenoteOptions, Failure> {
    Ok(DenoteOptions {
        kleene: KleeneOptions {
            tol: tolerance(c)?,
            max_iter: c.max_iter,
            check_monotone: true,
        },
        loop_unroll: unroll,
    })
}

fn gate_table(c: &Common, tol: &Tolerance) -> Result<GateTable, Failure> {
    let mut g = GateTable::default();
    if let Some(p) = &c.gates {
        let json = read(p)?;
        g.register_json(&json, tol)
            .map_err(|e| fail_from(&p.display().to_string(), e))?;
    }
    Ok(g)
}

fn read(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::user(format!("{}: {e}", p.display())))
}

fn parse_matrix(text: &str) -> Result<CMatrix> {
    let bad = |e: serde_json::Error| Error::Invalid(format!("bad matrix literal {text:?}: {e}"));
    if let Ok(rows) = serde_json::from_str::<Vec<Vec<f64>>>(text) {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Invalid(format!("ragged matrix literal {text:?}")));
        }
        return CMatrix::from_real(n, m, &rows.concat());
    }
    serde_json::from_str::<CMatrix>(text).map_err(bad)
}

/// Parses `key:value;key:value`. A value is a number or a matrix literal
/// (rows of reals, or rows of `[re, im]` pairs). A number `w` on a block of
/// size `d` stands for `scalar(w, d)`.
pub fn parse_blocks(
    spec: &str,
    sig: &Signature,
    scalar: impl Fn(f64, usize) -> CMatrix,
) -> Result<BTreeMap<BlockKey, CMatrix>> {
    let mut out = BTreeMap::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .rsplit_once(':')
            .ok_or_else(|| Error::Invalid(format!("expected key:value, got {part:?}")))?;
        let key: BlockKey = key.trim().parse()?;
        let d = sig.block_dim(&key)?;
        let value = value.trim();
        let m = if value.starts_with('[') {
            parse_matrix(value)?
        } else {
            let w: f64 = value
                .parse()
                .map_err(|_| Error::Invalid(format!("bad number {value:?}")))?;
            scalar(w, d)
        };
        if out.insert(key.clone(), m).is_some() {
            return Err(Error::Invalid(format!("block {key} given twice")));
        }
    }
    Ok(out)
}

/// A state from the mini-format; a bare weight is spread evenly over the block.
pub fn parse_state(spec: &str, sig: &Signature, tol: &Tolerance) -> Result<StateVector> {
    let parts = parse_blocks(spec, sig, |w, d| CMatrix::identity(d).scale(w / d as f64))?;
    StateVector::new(sig.clone(), parts, tol)
}

/// An effect from the mini-format; a bare number `w` means `w · 1`.
pub fn parse_effect(spec: &str, sig: &Signature, tol: &Tolerance) -> Result<EffectVector> {
    let parts = parse_blocks(spec, sig, |w, d| CMatrix::identity(d).scale(w))?;
    EffectVector::new(sig.clone(), parts, tol)
}

fn entries(parts: &BTreeMap<BlockKey, CMatrix>) -> Vec<BlockEntry> {
    parts
        .iter()
        .map(|(k, m)| BlockEntry {
            key: k.to_string(),
            trace: m.trace().re,
            matrix: m.clone(),
        })
        .collect()
}

fn loop_reports(d: &Denotation) -> Vec<LoopReport> {
    d.convergence()
        .into_iter()
        .map(|(label, info)| LoopReport { label, info })
        .collect()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// `|⟨q, f(ρ)⟩ - Σ_j tr(ρ_j · Σ_i f_ij*(q_i))|`, relative. Works column by
/// column, so the source may contain `nat`.
pub fn duality_residual(f: &QArrow, rho: &StateVector, q: &EffectVector) -> Result<f64> {
    let forward = q.pair(&rho.apply(f)?)?;
    let mut backward = 0.0;
    for (j, r) in &rho.parts {
        for (i, fij) in f.column(j).iter() {
            if let Some(qi) = q.parts.get(i) {
                backward += (r * &fij.apply_heisenberg(qi)?).trace().re;
            }
        }
    }
    Ok(relative(forward, backward))
}

fn compile_file(path: &Path, gates: &GateTable, opts: &DenoteOptions) -> Result<Denotation, Failure> {
    let src = read(path)?;
    compile(&src, gates, opts).map_err(|e| fail_from(&path.display().to_string(), e))
}

fn default_input(d: &Denotation, spec: Option<&str>, tol: &Tolerance) -> Result<(StateVector, String), Failure> {
    let sig = d.input().signature();
    match spec {
        Some(s) => Ok((
            parse_state(s, &sig, tol).map_err(|e| fail_from("--input", e))?,
            s.to_string(),
        )),
        None if sig == Signature::unit() => Ok((
            StateVector::distribution(&sig, &[1.0], tol).unwrap(),
            "unit".into(),
        )),
        None => Err(Failure::user(format!(
            "the program takes inputs {}; pass --input",
            d.input()
        ))),
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<RunReport, Failure> {
    let start = Instant::now();
    let opts = options(&a.common, a.unroll)?;
    let tol = opts.kleene.tol;
    let gates = gate_table(&a.common, &tol)?;
    let d = compile_file(&a.file, &gates, &opts)?;
    let (input, input_desc) = default_input(&d, a.input.as_deref(), &tol)?;
    let mut report = report_skeleton(a.file.display().to_string(), input_desc, &d);
    let schrodinger = a.picture != Picture::Heisenberg;
    let heisenberg = a.picture != Picture::Schrodinger;
    let out_state = if schrodinger || heisenberg {
        Some(d.run(&input).map_err(|e| fail_from("", e))?)
    } else {
        None
    };
    if schrodinger {
        report.pictures.push("schrodinger".into());
        let s = out_state.as_ref().unwrap();
        report.termination_weight = Some(s.total_weight());
        report.output_state = Some(entries(&s.parts));
    }
    if heisenberg {
        report.pictures.push("heisenberg".into());
        let out_sig = d.output().signature();
        let post = match &a.effect {
            Some(s) => parse_effect(s, &out_sig, &tol).map_err(|e| fail_from("--effect", e))?,
            None if out_sig.is_finite() => EffectVector::ones(&out_sig).map_err(|e| fail_from("", e))?,
            // the unit effect restricted to the blocks the run reached
            None => {
                let parts = out_state.as_ref().unwrap().parts.iter();
                let ones = parts.map(|(k, m)| (k.clone(), CMatrix::identity(m.rows()))).collect();
                EffectVector::new(out_sig.clone(), ones, &tol).map_err(|e| fail_from("", e))?
            }
        };
        let pre = d.wp(&post).map_err(|e| fail_from("", e))?;
        let forward = post.pair(out_state.as_ref().unwrap()).map_err(|e| fail_from("", e))?;
        let backward = pre.pair(&input).map_err(|e| fail_from("", e))?;
        report.duality_residual = Some(relative(forward, backward));
        report.post_effect = Some(entries(&post.parts));
        report.precondition = Some(entries(&pre.parts));
    }
    report.loops = loop_reports(&d);
    report.converged = d.converged();
    if a.common.timing {
        report.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

fn report_skeleton(program: String, input: String, d: &Denotation) -> RunReport {
    RunReport {
        program,
        input,
        input_signature: d.input().signature().to_string(),
        output_signature: d.output().signature().to_string(),
        pictures: Vec::new(),
        output_state: None,
        termination_weight: None,
        post_effect: None,
        precondition: None,
        loops: Vec::new(),
        converged: true,
        duality_residual: None,
        comparison: None,
        wall_time_ms: None,
    }
}

/// Columns probed when the source contains `nat`.
const NAT_PROBE: usize = 8;

/// Invariant checks on an arrow: CP blocks, trace-nonincreasing columns, the
/// subunital dual, and the duality pairing on random state/effect pairs.
pub fn check_arrow(f: &QArrow, samples: usize, seed: u64, tol: &Tolerance) -> Result<CheckSummary> {
    let keys = f
        .source()
        .keys()
        .unwrap_or_else(|| f.source().keys_up_to(NAT_PROBE));
    let mut issues = Vec::new();
    let mut min_eig = f64::INFINITY;
    let mut blocks = 0;
    let mut cp = true;
    let mut tni = true;
    let mut reached: BTreeMap<BlockKey, usize> = BTreeMap::new();
    for j in &keys {
        for (i, m) in f.column(j).iter() {
            blocks += 1;
            reached.insert(i.clone(), m.out_dim());
            let ev = m.choi().matrix.min_eigenvalue(tol)?;
            min_eig = min_eig.min(ev);
            if !m.choi().is_cp(tol)? {
                cp = false;
                issues.push(format!("block {i} <- {j} is not completely positive (min eigenvalue {ev:.3e})"));
            }
        }
        if !f.is_column_trace_nonincreasing(j, tol)? {
            tni = false;
            issues.push(format!("column {j} is not trace-nonincreasing"));
        }
    }
    let subunital = match (f.source().is_finite(), f.target().is_finite()) {
        (true, true) => f.dualize()?.is_subunital(tol)?,
        _ => keys.iter().all(|j| {
            f.column_unit_image(j)
                .and_then(|u| crate::matrix::loewner_leq(&u, &CMatrix::identity(u.rows()), tol))
                .unwrap_or(false)
        }),
    };
    if !subunital {
        issues.push("dual arrow is not subunital".into());
    }
    let mut rng = random::rng(seed);
    let mut worst: f64 = 0.0;
    let src = f.source();
    for _ in 0..samples {
        let weights: Vec<f64> = keys.iter().map(|_| rand::Rng::random::<f64>(&mut rng) + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        let parts = keys
            .iter()
            .zip(&weights)
            .map(|(k, w)| Ok((k.clone(), random::density(src.block_dim(k)?, w / total, &mut rng))))
            .collect::<Result<_>>()?;
        let rho = StateVector::new(src.clone(), parts, tol)?;
        let q_parts = reached
            .iter()
            .map(|(k, &d)| (k.clone(), random::effect(d, &mut rng)))
            .collect();
        let q = EffectVector::new(f.target().clone(), q_parts, tol)?;
        worst = worst.max(duality_residual(f, &rho, &q)?);
    }
    if worst > tol.eps_eq {
        issues.push(format!("duality residual {worst:.3e} exceeds {:.1e}", tol.eps_eq));
    }
    Ok(CheckSummary {
        subject: String::new(),
        source: f.source().to_string(),
        target: f.target().to_string(),
        columns_checked: keys.len(),
        blocks_checked: blocks,
        min_choi_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        completely_positive: cp,
        trace_nonincreasing: tni,
        subunital_after_dualize: Some(subunital),
        duality_samples: samples,
        max_duality_residual: worst,
        converged: true,
        ok: issues.is_empty(),
        issues,
    })
}

pub fn cmd_check(a: &CheckArgs) -> Result<CheckSummary, Failure> {
    let opts = options(&a.common, None)?;
    let tol = opts.kleene.tol;
    let fail = |e| fail_from("", e);
    if let Some(path) = &a.arrow {
        let dump: ArrowDump = serde_json::from_str(&read(path)?)
            .map_err(|e| Failure::user(format!("{}: {e}", path.display())))?;
        let report = dump.check(&tol).map_err(fail)?;
        if !report.ok {
            return Ok(CheckSummary {
                subject: path.display().to_string(),
                source: dump.source.to_string(),
                target: dump.target.to_string(),
                columns_checked: dump.source.num_blocks().unwrap_or(0),
                blocks_checked: dump.blocks.len(),
                min_choi_eigenvalue: report.min_choi_eigenvalue,
                completely_positive: !report.issues.iter().any(|i| i.contains("completely positive")),
                trace_nonincreasing: !report.issues.iter().any(|i| i.contains("trace-nonincreasing")),
                subunital_after_dualize: None,
                duality_samples: 0,
                max_duality_residual: 0.0,
                converged: true,
                issues: report.issues,
                ok: false,
            });
        }
        let f = dump.to_arrow(&tol).map_err(fail)?;
        let mut s = check_arrow(&f, a.samples, a.common.seed, &tol).map_err(fail)?;
        s.subject = path.display().to_string();
        return Ok(s);
    }
    let file = a.file.as_ref().expect("clap requires a file or --arrow");
    let gates = gate_table(&a.common, &tol)?;
    let d = compile_file(file, &gates, &opts)?;
    let mut s = check_arrow(&d.arrow, a.samples, a.common.seed, &tol).map_err(fail)?;
    s.subject = file.display().to_string();
    s.converged = d.converged();
    Ok(s)
}

pub fn cmd_demo(name: DemoName, c: &Common) -> Result<RunReport, Failure> {
    let start = Instant::now();
    let opts = options(c, None)?;
    let tol = opts.kleene.tol;
    let gates = gate_table(c, &tol)?;
    let fail = |e| fail_from("", e);
    let (label, src) = match name {
        DemoName::Teleport => ("teleport.qpl", programs::TELEPORT),
        DemoName::Coin => ("coin.qpl", programs::COIN),
        DemoName::NatAdd => ("nat_add.qpl", programs::NAT_ADD),
    };
    let d = compile(src, &gates, &opts).map_err(|e| fail_from(label, e))?;
    let mut report;
    match name {
        DemoName::Teleport => {
            let mut rng = random::rng(c.seed);
            let rho = random::state(&Signature::qbit(), 1.0, &mut rng);
            let q = random::effect_vector(&Signature::qbit(), &mut rng);
            report = report_skeleton(label.into(), "random qbit state".into(), &d);
            let out = d.run(&rho).map_err(fail)?;
            let pre = d.wp(&q).map_err(fail)?;
            report.pictures = vec!["schrodinger".into(), "heisenberg".into()];
            report.duality_residual = Some(relative(
                q.pair(&out).map_err(fail)?,
                pre.pair(&rho).map_err(fail)?,
            ));
            report.termination_weight = Some(out.total_weight());
            report.output_state = Some(entries(&out.parts));
            report.post_effect = Some(entries(&q.parts));
            report.precondition = Some(entries(&pre.parts));
            let dist = d
                .arrow
                .max_choi_distance(&QArrow::identity(&Signature::qbit()))
                .map_err(fail)?;
            report.comparison = Some(Comparison {
                description: "Choi distance to the identity channel".into(),
                max_error: dist,
                threshold: 1e-9,
                passed: dist < 1e-9,
                table: Vec::new(),
            });
        }
        DemoName::Coin => {
            let unit = StateVector::distribution(&Signature::unit(), &[1.0], &tol).unwrap();
            let out = d.run(&unit).map_err(fail)?;
            report = report_skeleton(label.into(), "unit".into(), &d);
            report.pictures = vec!["schrodinger".into()];
            report.termination_weight = Some(out.total_weight());
            report.output_state = Some(entries(&out.parts));
            let table: Vec<(usize, f64, f64)> = (0..=20)
                .map(|n| (n, out.weight(&BlockKey::flat(n)), 0.5f64.powi(n as i32 + 1)))
                .collect();
            let err = table.iter().map(|(_, o, e)| (o - e).abs()).fold(0.0, f64::max);
            report.comparison = Some(Comparison {
                description: "P(n heads before the first tail) against 2^-(n+1), n <= 20".into(),
                max_error: err,
                threshold: 1e-6,
                passed: err <= 1e-6,
                table,
            });
        }
        DemoName::NatAdd => {
            let spec = "0:2,3:1";
            let input = parse_state(spec, &d.input().signature(), &tol).map_err(fail)?;
            let out = d.run(&input).map_err(fail)?;
            report = report_skeleton(label.into(), "x = 2, y = 3".into(), &d);
            report.pictures = vec!["schrodinger".into()];
            report.termination_weight = Some(out.total_weight());
            report.output_state = Some(entries(&out.parts));
            let err = (1.0 - out.weight(&BlockKey::flat(5))).abs()
                + (out.total_weight() - out.weight(&BlockKey::flat(5))).abs();
            report.comparison = Some(Comparison {
                description: "point mass at s = 5".into(),
                max_error: err,
                threshold: 1e-12,
                passed: err <= 1e-12,
                table: Vec::new(),
            });
        }
    }
    report.loops = loop_reports(&d);
    report.converged = d.converged();
    if c.timing {
        report.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_spec_mini_format() {
        let tol = Tolerance::default();
        let s = parse_state("0:0.25; 1:0.75", &Signature::bit(), &tol).unwrap();
        assert_eq!(s.weight(&BlockKey::flat(1)), 0.75);
        let q = parse_state("0:[[1,0],[0,0]]", &Signature::qbit(), &tol).unwrap();
        assert_eq!(q.parts[&BlockKey::flat(0)], CMatrix::unit(2, 0, 0));
        let c = parse_state("0:[[[0.5,0],[0,-0.5]],[[0,0.5],[0.5,0]]]", &Signature::qbit(), &tol).unwrap();
        assert_eq!(c.parts[&BlockKey::flat(0)].get(0, 1).im, -0.5);
        let nat2: Signature = "nat ⊗ nat".parse().unwrap();
        let n = parse_state("0:2,3:1", &nat2, &tol).unwrap();
        assert_eq!(n.weight(&BlockKey { term: 0, idx: vec![2, 3] }), 1.0);
        let mixed = parse_state("0:1", &Signature::qbit(), &tol).unwrap();
        assert_eq!(mixed.parts[&BlockKey::flat(0)], CMatrix::identity(2).scale(0.5));

        for bad in ["0", "0:x", "5:1", "0:0.7;1:0.7", "0:[[1,0]]", "0:1;0:0"] {
            assert!(parse_state(bad, &Signature::bit(), &tol).is_err(), "{bad}");
        }
        let e = parse_effect("1:1", &Signature::bit(), &tol).unwrap();
        assert_eq!(e.parts.len(), 1);
        assert!(parse_effect("0:2", &Signature::bit(), &tol).is_err());
    }

    #[test]
    fn environment_overrides_defaults_and_flags_override_both() {
        let mut c = Common {
            tol: None,
            fix_tol: None,
            max_iter: 10,
            strict: false,
            timing: false,
            gates: None,
            out: None,
            seed: 0,
        };
        std::env::set_var("QPL_FIX_TOL", "1e-6");
        assert_eq!(tolerance(&c).unwrap().eps_fix, 1e-6);
        c.fix_tol = Some(1e-3);
        assert_eq!(tolerance(&c).unwrap().eps_fix, 1e-3);
        std::env::set_var("QPL_FIX_TOL", "soon");
        c.fix_tol = None;
        assert_eq!(tolerance(&c).unwrap_err().code, 2);
        std::env::remove_var("QPL_FIX_TOL");
        assert_eq!(tolerance(&c).unwrap().eps_fix, 1e-10);
    }

    #[test]
    fn corpus_arrows_pass_the_checker() {
        let tol = Tolerance::default();
        let opts = DenoteOptions::default();
        for (name, src) in programs::corpus() {
            let d = compile(src, &GateTable::default(), &opts).unwrap();
            let s = check_arrow(&d.arrow, 5, 1, &tol).unwrap();
            assert!(s.ok, "{name}: {:?}", s.issues);
        }
    }
}
