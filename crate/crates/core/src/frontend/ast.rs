use std::fmt;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Bit,
    Qbit,
    Nat,
}

impl Type {
    pub fn is_classical(self) -> bool {
        self != Type::Qbit
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Bit => "bit",
            Type::Qbit => "qbit",
            Type::Nat => "nat",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcDef {
    pub name: String,
    pub params: Vec<Param>,
    /// Declared results; `None` means the parameters are returned unchanged in type.
    pub outputs: Option<Vec<Param>>,
    pub body: Stmt,
    pub pos: Pos,
}

impl ProcDef {
    pub fn results(&self) -> &[Param] {
        self.outputs.as_deref().unwrap_or(&self.params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub input: Vec<Param>,
    pub procs: Vec<ProcDef>,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(usize),
    Var(String),
    Call { func: String, args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Skip,
    New { ty: Type, var: String },
    Discard { var: String },
    Apply { target: String, gate: String, args: Vec<String> },
    Assign { target: String, expr: Expr },
    Measure { var: String, then_branch: Box<Stmt>, else_branch: Box<Stmt> },
    If { var: String, then_branch: Box<Stmt>, else_branch: Box<Stmt> },
    While { var: String, body: Box<Stmt> },
    Call { name: String, args: Vec<String> },
    Seq(Vec<Stmt>),
}

impl Stmt {
    pub fn new(kind: StmtKind, pos: Pos) -> Self {
        Stmt { kind, pos }
    }

    pub fn skip() -> Self {
        Stmt::new(StmtKind::Skip, Pos::default())
    }

    pub fn seq(stmts: Vec<Stmt>) -> Self {
        let pos = stmts.first().map(|s| s.pos).unwrap_or_default();
        Stmt::new(StmtKind::Seq(stmts), pos)
    }

    /// Number of nodes in the tree, counting sequences.
    pub fn node_count(&self) -> usize {
        1 + match &self.kind {
            StmtKind::Measure {
                then_branch,
                else_branch,
                ..
            }
            | StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => then_branch.node_count() + else_branch.node_count(),
            StmtKind::While { body, .. } => body.node_count(),
            StmtKind::Seq(v) => v.iter().map(Stmt::node_count).sum(),
            _ => 0,
        }
    }

    pub fn describe(&self) -> &'static str {
        match &self.kind {
            StmtKind::Skip => "skip",
            StmtKind::New { .. } => "new",
            StmtKind::Discard { .. } => "discard",
            StmtKind::Apply { .. } => "unitary",
            StmtKind::Assign { .. } => "assign",
            StmtKind::Measure { .. } => "measure",
            StmtKind::If { .. } => "if",
            StmtKind::While { .. } => "while",
            StmtKind::Call { .. } => "call",
            StmtKind::Seq(_) => "sequence",
        }
    }
}
