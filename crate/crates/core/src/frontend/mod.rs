//! Concrete syntax, typing and denotational semantics of the programming language.
//!
//! ```text
//! prog  := ["input" "(" params ")" [";"]] {procdef} stmts
//! procdef := "proc" ident "(" params ")" ["->" "(" params ")"] block
//! stmt  := "skip" | "new" type ident | "discard" ident
//!        | ident "*=" gate "(" idents ")" | ident ":=" expr
//!        | "measure" ident "then" block "else" block
//!        | "if" ident block "else" block | "while" ident "do" block
//!        | "call" ident "(" idents ")"
//! expr  := number | ident | builtin "(" idents ")"
//! ```
//!
//! After `measure q`, `q` is a bit holding the outcome: the `then` branch runs
//! on outcome 1 and the `else` branch on outcome 0. `if` and `while` test for 1.

pub mod ast;
pub mod denote;
pub mod gates;
pub mod lexer;
pub mod parser;
pub mod typecheck;

pub use ast::{Expr, Param, Pos, ProcDef, Program, Stmt, StmtKind, Type};
pub use denote::{denote, run, wp_run, DenoteOptions, Denotation, LoopRecord};
pub use gates::GateTable;
pub use parser::{parse_program, parse_stmt};
pub use typecheck::{typecheck, Context, ProcTyping, StmtTyping, Typing};

use crate::error::Result;

/// Bundled example programs.
pub mod programs {
    pub const TELEPORT: &str = include_str!("../../programs/teleport.qpl");
    pub const COIN: &str = include_str!("../../programs/coin.qpl");
    pub const NAT_ADD: &str = include_str!("../../programs/nat_add.qpl");
    pub const SKIP: &str = include_str!("../../programs/skip.qpl");
    pub const MEASURE: &str = include_str!("../../programs/measure.qpl");
    pub const GEOMETRIC_REC: &str = include_str!("../../programs/geometric_rec.qpl");
    pub const MALFORMED: &str = include_str!("../../programs/malformed.qpl");

    /// `(name, source)` for every well-formed bundled program.
    pub fn corpus() -> [(&'static str, &'static str); 6] {
        [
            ("teleport", TELEPORT),
            ("coin", COIN),
            ("nat_add", NAT_ADD),
            ("skip", SKIP),
            ("measure", MEASURE),
            ("geometric_rec", GEOMETRIC_REC),
        ]
    }
}

/// Parses, checks and denotes a program.
pub fn compile(source: &str, gates: &GateTable, opts: &DenoteOptions) -> Result<Denotation> {
    denote(&parse_program(source)?, gates, opts)
}

#[cfg(test)]
mod tests;
