//! Hand-rolled lexer and recursive-descent parser for `.thr` sources.

use super::{BinOp, Expr, Span, Stmt, StmtKind, ThreadProgram};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    Syntax {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: duplicate local '{name}'")]
    DuplicateLocal { name: String, line: u32, col: u32 },
    #[error("{line}:{col}: identifier '{name}' is used both as a lock and as a memory location")]
    UnknownIdentifier { name: String, line: u32, col: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::Kw(k) => format!("'{k}'"),
            Tok::Punct(p) => format!("'{p}'"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

const KEYWORDS: &[&str] = &["lock", "unlock", "local", "if", "else", "while", "bound"];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = *self.src.get(self.pos)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<(Tok, Span), ParseError> {
        self.skip_trivia();
        let span = Span {
            line: self.line,
            col: self.col,
        };
        let c = match self.peek() {
            None => return Ok((Tok::Eof, span)),
            Some(c) => c,
        };
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == b'_' {
                    self.bump();
                } else {
                    break;
                }
            }
            let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            if let Some(kw) = KEYWORDS.iter().find(|&&k| k == word) {
                return Ok((Tok::Kw(kw), span));
            }
            return Ok((Tok::Ident(word.to_string()), span));
        }
        if c.is_ascii_digit() {
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    self.bump();
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let value = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                line: span.line,
                col: span.col,
                expected: "integer within i64 range".to_string(),
                found: format!("'{text}'"),
            })?;
            return Ok((Tok::Int(value), span));
        }
        // Multi-char operators first.
        for p in ["==", "!=", "<=", "&&", "||"] {
            if self.src[self.pos..].starts_with(p.as_bytes()) {
                self.bump();
                self.bump();
                return Ok((Tok::Punct(p), span));
            }
        }
        for p in ["(", ")", "{", "}", ";", ",", "=", "+", "-", "*", "<", "!"] {
            if self.src[self.pos..].starts_with(p.as_bytes()) {
                self.bump();
                return Ok((Tok::Punct(p), span));
            }
        }
        Err(ParseError::Syntax {
            line: span.line,
            col: span.col,
            expected: "a token".to_string(),
            found: format!("'{}'", c as char),
        })
    }
}

struct Parser {
    tokens: Vec<(Tok, Span)>,
    pos: usize,
    decls: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let (tok, span) = &self.tokens[self.pos];
        ParseError::Syntax {
            line: span.line,
            col: span.col,
            expected: expected.to_string(),
            found: tok.describe(),
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<Span, ParseError> {
        if *self.peek() == Tok::Punct(p) {
            Ok(self.bump().1)
        } else {
            Err(self.error(&format!("'{p}'")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().1;
                Ok((name, span))
            }
            _ => Err(self.error(what)),
        }
    }

    fn parse_decls(&mut self) -> Result<(), ParseError> {
        while *self.peek() == Tok::Kw("local") {
            self.bump();
            loop {
                let (name, span) = self.expect_ident("a local variable name")?;
                if self.decls.contains(&name) {
                    return Err(ParseError::DuplicateLocal {
                        name,
                        line: span.line,
                        col: span.col,
                    });
                }
                self.decls.push(name);
                if *self.peek() == Tok::Punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect_punct(";")?;
        }
        Ok(())
    }

    fn parse_block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::Punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error("'}'"));
            }
            stmts.push(self.parse_stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Kw(kw @ ("lock" | "unlock")) => {
                self.bump();
                self.expect_punct("(")?;
                let (name, _) = self.expect_ident("a lock name")?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                let kind = if kw == "lock" {
                    StmtKind::Lock(name)
                } else {
                    StmtKind::Unlock(name)
                };
                Ok(Stmt { kind, span })
            }
            Tok::Kw("if") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let then_branch = self.parse_block()?;
                let else_branch = if *self.peek() == Tok::Kw("else") {
                    self.bump();
                    self.parse_block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt {
                    kind: StmtKind::If {
                        cond,
                        then_branch,
                        else_branch,
                    },
                    span,
                })
            }
            Tok::Kw("while") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                if *self.peek() != Tok::Kw("bound") {
                    return Err(self.error("'bound' (every loop declares a static bound)"));
                }
                self.bump();
                let bound = match self.peek().clone() {
                    Tok::Int(v) if (0..=u32::MAX as i64).contains(&v) => {
                        self.bump();
                        v as u32
                    }
                    _ => return Err(self.error("a non-negative loop bound")),
                };
                let body = self.parse_block()?;
                Ok(Stmt {
                    kind: StmtKind::While { cond, bound, body },
                    span,
                })
            }
            Tok::Ident(name) => {
                self.bump();
                self.expect_punct("=")?;
                let expr = self.parse_expr()?;
                self.expect_punct(";")?;
                let kind = if self.decls.contains(&name) {
                    StmtKind::AssignLocal { local: name, expr }
                } else {
                    StmtKind::AssignShared { loc: name, expr }
                };
                Ok(Stmt { kind, span })
            }
            _ => Err(self.error("a statement")),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.parse_binary(0)
    }

    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("||") => BinOp::Or,
                Tok::Punct("&&") => BinOp::And,
                Tok::Punct("==") => BinOp::Eq,
                Tok::Punct("!=") => BinOp::Ne,
                Tok::Punct("<") => BinOp::Lt,
                Tok::Punct("<=") => BinOp::Le,
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                Tok::Punct("*") => BinOp::Mul,
                _ => break,
            };
            if op.precedence() < min_prec {
                break;
            }
            self.bump();
            let rhs = self.parse_binary(op.precedence() + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Punct("!") => {
                self.bump();
                Ok(Expr::Not(Box::new(self.parse_unary()?)))
            }
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Expr::Var(name))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.error("an expression")),
        }
    }
}

/// Checks that no identifier is used both as a lock name and as a shared
/// location; the namespaces are disjoint by definition.
fn check_namespaces(program: &ThreadProgram) -> Result<(), ParseError> {
    let mut locks: HashSet<&str> = HashSet::new();
    let mut locs: Vec<(&str, Span)> = Vec::new();

    fn visit_expr<'a>(e: &'a Expr, program: &ThreadProgram, span: Span, locs: &mut Vec<(&'a str, Span)>) {
        match e {
            Expr::Int(_) => {}
            Expr::Var(name) => {
                if !program.is_local(name) {
                    locs.push((name, span));
                }
            }
            Expr::Not(e) => visit_expr(e, program, span, locs),
            Expr::Binary(_, a, b) => {
                visit_expr(a, program, span, locs);
                visit_expr(b, program, span, locs);
            }
        }
    }

    fn visit<'a>(
        stmts: &'a [Stmt],
        program: &ThreadProgram,
        locks: &mut HashSet<&'a str>,
        locs: &mut Vec<(&'a str, Span)>,
    ) {
        for stmt in stmts {
            match &stmt.kind {
                StmtKind::Lock(l) | StmtKind::Unlock(l) => {
                    locks.insert(l);
                }
                StmtKind::AssignShared { loc, expr } => {
                    locs.push((loc, stmt.span));
                    visit_expr(expr, program, stmt.span, locs);
                }
                StmtKind::AssignLocal { expr, .. } => visit_expr(expr, program, stmt.span, locs),
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    visit_expr(cond, program, stmt.span, locs);
                    visit(then_branch, program, locks, locs);
                    visit(else_branch, program, locks, locs);
                }
                StmtKind::While { cond, body, .. } => {
                    visit_expr(cond, program, stmt.span, locs);
                    visit(body, program, locks, locs);
                }
            }
        }
    }

    visit(&program.body, program, &mut locks, &mut locs);
    for (name, span) in locs {
        if locks.contains(name) {
            return Err(ParseError::UnknownIdentifier {
                name: name.to_string(),
                line: span.line,
                col: span.col,
            });
        }
    }
    Ok(())
}

/// Parses a `.thr` source into a [`ThreadProgram`] named `"thread"`.
pub fn parse_thread(source: &str) -> Result<ThreadProgram, ParseError> {
    let mut lexer = Lexer::new(source);
    let mut tokens = Vec::new();
    loop {
        let (tok, span) = lexer.next_token()?;
        let eof = tok == Tok::Eof;
        tokens.push((tok, span));
        if eof {
            break;
        }
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        decls: Vec::new(),
    };
    parser.parse_decls()?;
    let mut body = Vec::new();
    while *parser.peek() != Tok::Eof {
        body.push(parser.parse_stmt()?);
    }
    let program = ThreadProgram {
        name: "thread".to_string(),
        decls: parser.decls,
        body,
    };
    check_namespaces(&program)?;
    Ok(program)
}
