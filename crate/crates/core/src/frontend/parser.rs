use super::ast::{Expr, Param, Pos, ProcDef, Program, Stmt, StmtKind, Type};
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result};

const KEYWORDS: &[&str] = &[
    "skip", "new", "discard", "measure", "then", "else", "if", "while", "do", "call", "proc",
    "input", "bit", "qbit", "nat",
];

/// Parses a whole program.
pub fn parse_program(src: &str) -> Result<Program> {
    let mut p = Parser::new(src)?;
    let program = p.program()?;
    p.expect(&Tok::Eof)?;
    Ok(program)
}

/// Parses a statement sequence with no header or procedures.
pub fn parse_stmt(src: &str) -> Result<Stmt> {
    let mut p = Parser::new(src)?;
    let s = p.stmts(&Tok::Eof)?;
    p.expect(&Tok::Eof)?;
    Ok(s)
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    open: Vec<Pos>,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser {
            toks: tokenize(src)?,
            at: 0,
            open: Vec::new(),
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn error_at(pos: Pos, msg: String) -> Error {
        Error::Parse {
            line: pos.line,
            col: pos.col,
            msg,
        }
    }

    fn unexpected(&self, wanted: &str) -> Error {
        let t = self.peek();
        if t.tok == Tok::Eof {
            if let Some(open) = self.open.last() {
                return Self::error_at(t.pos, format!("unclosed `{{` opened at {open}"));
            }
        }
        if t.tok == Tok::RBrace && self.open.is_empty() {
            return Self::error_at(t.pos, "unmatched `}`".into());
        }
        Self::error_at(t.pos, format!("expected {wanted}, found {}", t.tok.describe()))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<Pos> {
        if &self.peek().tok == tok {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos> {
        if self.at_keyword(kw) {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos)> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.next();
                match t.tok {
                    Tok::Ident(s) => Ok((s, t.pos)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn ty(&mut self) -> Result<Type> {
        let ty = match &self.peek().tok {
            Tok::Ident(s) if s == "bit" => Type::Bit,
            Tok::Ident(s) if s == "qbit" => Type::Qbit,
            Tok::Ident(s) if s == "nat" => Type::Nat,
            _ => return Err(self.unexpected("a type (bit, qbit or nat)")),
        };
        self.next();
        Ok(ty)
    }

    fn params(&mut self) -> Result<Vec<Param>> {
        self.expect(&Tok::LParen)?;
        let mut out = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let (name, pos) = self.ident()?;
                self.expect(&Tok::Colon)?;
                let ty = self.ty()?;
                out.push(Param { name, ty, pos });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        Ok(out)
    }

    fn idents(&mut self) -> Result<Vec<String>> {
        self.expect(&Tok::LParen)?;
        let mut out = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                out.push(self.ident()?.0);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        Ok(out)
    }

    fn program(&mut self) -> Result<Program> {
        let mut input = Vec::new();
        if self.at_keyword("input") {
            self.next();
            input = self.params()?;
            self.eat(&Tok::Semi);
        }
        let mut procs = Vec::new();
        while self.at_keyword("proc") {
            let pos = self.next().pos;
            let (name, _) = self.ident()?;
            let params = self.params()?;
            let outputs = if self.eat(&Tok::Arrow) {
                Some(self.params()?)
            } else {
                None
            };
            let body = self.block()?;
            self.eat(&Tok::Semi);
            procs.push(ProcDef {
                name,
                params,
                outputs,
                body,
                pos,
            });
        }
        let body = self.stmts(&Tok::Eof)?;
        Ok(Program { input, procs, body })
    }

    fn block(&mut self) -> Result<Stmt> {
        let open = self.expect(&Tok::LBrace)?;
        self.open.push(open);
        let s = self.stmts(&Tok::RBrace)?;
        self.expect(&Tok::RBrace)?;
        self.open.pop();
        Ok(s)
    }

    /// Statements separated by `;` up to `end`. A separator is optional after
    /// a statement that ends in a block; an empty sequence is `skip`.
    fn stmts(&mut self, end: &Tok) -> Result<Stmt> {
        let start = self.peek().pos;
        let mut out = Vec::new();
        while self.peek().tok != *end {
            let s = self.stmt()?;
            let ends_in_block = matches!(
                s.kind,
                StmtKind::Measure { .. } | StmtKind::If { .. } | StmtKind::While { .. }
            );
            out.push(s);
            if !self.eat(&Tok::Semi) && !ends_in_block && self.peek().tok != *end {
                let wanted = format!("`;` or {}", end.describe());
                return Err(self.unexpected(&wanted));
            }
        }
        Ok(match out.len() {
            0 => Stmt::new(StmtKind::Skip, start),
            1 => out.pop().unwrap(),
            _ => Stmt::seq(out),
        })
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let pos = self.peek().pos;
        let kind = match &self.peek().tok {
            Tok::Ident(kw) => match kw.as_str() {
                "skip" => {
                    self.next();
                    StmtKind::Skip
                }
                "new" => {
                    self.next();
                    let ty = self.ty()?;
                    let (var, _) = self.ident()?;
                    StmtKind::New { ty, var }
                }
                "discard" => {
                    self.next();
                    StmtKind::Discard { var: self.ident()?.0 }
                }
                "measure" => {
                    self.next();
                    let (var, _) = self.ident()?;
                    self.keyword("then")?;
                    let then_branch = Box::new(self.block()?);
                    self.keyword("else")?;
                    let else_branch = Box::new(self.block()?);
                    StmtKind::Measure {
                        var,
                        then_branch,
                        else_branch,
                    }
                }
                "if" => {
                    self.next();
                    let (var, _) = self.ident()?;
                    self.eat(&Tok::Ident("then".into()));
                    let then_branch = Box::new(self.block()?);
                    self.keyword("else")?;
                    let else_branch = Box::new(self.block()?);
                    StmtKind::If {
                        var,
                        then_branch,
                        else_branch,
                    }
                }
                "while" => {
                    self.next();
                    let (var, _) = self.ident()?;
                    self.keyword("do")?;
                    StmtKind::While {
                        var,
                        body: Box::new(self.block()?),
                    }
                }
                "call" => {
                    self.next();
                    let (name, _) = self.ident()?;
                    let args = self.idents()?;
                    StmtKind::Call { name, args }
                }
                _ => {
                    let (target, _) = self.ident()?;
                    if self.eat(&Tok::ApplyEq) {
                        let (gate, _) = self.ident()?;
                        let args = self.idents()?;
                        StmtKind::Apply { target, gate, args }
                    } else if self.eat(&Tok::Assign) {
                        StmtKind::Assign {
                            target,
                            expr: self.expr()?,
                        }
                    } else {
                        return Err(self.unexpected("`*=` or `:=`"));
                    }
                }
            },
            _ => return Err(self.unexpected("a statement")),
        };
        Ok(Stmt::new(kind, pos))
    }

    fn expr(&mut self) -> Result<Expr> {
        if let Tok::Num(n) = self.peek().tok {
            self.next();
            return Ok(Expr::Lit(n));
        }
        let (name, _) = self.ident()?;
        if self.peek().tok == Tok::LParen {
            Ok(Expr::Call {
                func: name,
                args: self.idents()?,
            })
        } else {
            Ok(Expr::Var(name))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_err(src: &str) -> (usize, usize, String) {
        match parse_program(src).unwrap_err() {
            Error::Parse { line, col, msg } => (line, col, msg),
            e => panic!("expected a parse error, got {e}"),
        }
    }

    #[test]
    fn hadamard_then_measure_has_four_nodes() {
        let s = parse_stmt("new qbit q; q *= H(q); measure q then {skip} else {skip}").unwrap();
        let StmtKind::Seq(parts) = &s.kind else {
            panic!("expected a sequence")
        };
        let kinds: Vec<_> = parts.iter().map(Stmt::describe).collect();
        assert_eq!(kinds, ["new", "unitary", "measure"]);
        // the branches are two more skip nodes
        assert_eq!(s.node_count(), 6);
        assert_eq!(parts.len() + 1, 4);
        assert_eq!(parts[2].pos, Pos { line: 1, col: 24 });
    }

    #[test]
    fn unbalanced_braces_report_positions() {
        let (line, col, msg) = parse_err("new qbit q;\nmeasure q then { skip \nelse { skip }");
        assert_eq!((line, col), (3, 1));
        assert!(msg.contains("`else`"), "{msg}");

        let (line, _, msg) = parse_err("while b do {\n  skip;\n");
        assert_eq!(line, 3);
        assert!(msg.contains("unclosed `{` opened at 1:12"), "{msg}");

        let (line, col, msg) = parse_err("skip;\n}");
        assert_eq!((line, col), (2, 1));
        assert!(msg.contains("unmatched"), "{msg}");
    }

    #[test]
    fn headers_procedures_and_expressions() {
        let p = parse_program(
            "input (b: bit, q: qbit);
             proc flip(q: qbit) -> (r: bit) { q *= H(q); measure q then {} else {}; r := q }
             n := add(x, y); m := 3; k := m
             call flip(q)",
        );
        // missing separator after `k := m`
        assert!(p.is_err());
        let p = parse_program(
            "input (b: bit, q: qbit);
             proc flip(q: qbit) -> (r: bit) { q *= H(q); measure q then {} else {}; r := q }
             n := add(x, y); m := 3; call flip(q);",
        )
        .unwrap();
        assert_eq!(p.input.len(), 2);
        assert_eq!(p.input[1].ty, Type::Qbit);
        assert_eq!(p.procs[0].results()[0].name, "r");
        let StmtKind::Seq(parts) = &p.body.kind else {
            panic!()
        };
        assert_eq!(
            parts[0].kind,
            StmtKind::Assign {
                target: "n".into(),
                expr: Expr::Call {
                    func: "add".into(),
                    args: vec!["x".into(), "y".into()]
                }
            }
        );
        assert!(matches!(parts[2].kind, StmtKind::Call { .. }));
    }

    #[test]
    fn keywords_are_not_identifiers() {
        let (_, _, msg) = parse_err("new qbit while");
        assert!(msg.contains("identifier"), "{msg}");
        assert_eq!(parse_stmt("").unwrap().kind, StmtKind::Skip);
    }
}
