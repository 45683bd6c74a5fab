//! The thread language: a deterministic toy imperative language with
//! `lock(l)`/`unlock(l)` synchronization, shared memory locations, thread-local
//! variables and statically bounded loops.
//!
//! Grammar sketch (statements end with `;`, blocks are braced, `#` starts a
//! line comment, files use the `.thr` extension):
//!
//! ```text
//! thread  := decl* stmt*
//! decl    := "local" ident ("," ident)* ";"
//! stmt    := "lock" "(" ident ")" ";"
//!          | "unlock" "(" ident ")" ";"
//!          | ident "=" expr ";"
//!          | "if" "(" expr ")" block ("else" block)?
//!          | "while" "(" expr ")" "bound" int block
//! block   := "{" stmt* "}"
//! ```
//!
//! Expressions use `+ - * == != < <= && || !` over 64-bit integers (0 is
//! false, anything else is true; comparisons yield 0/1). Identifiers that are
//! not declared `local` denote shared memory locations. Lock names and
//! location names are disjoint namespaces. Every `while` loop carries a static
//! iteration bound so executions are finite.

mod parser;
mod wf;

pub use parser::{parse_thread, ParseError};
pub use wf::{check_well_formed, SyncMode, Violation, ViolationKind, WellFormedness};

use std::fmt;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// One thread of a program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadProgram {
    pub name: String,
    /// Declared thread-local variables.
    pub decls: Vec<String>,
    pub body: Vec<Stmt>,
}

impl ThreadProgram {
    pub fn empty(name: &str) -> Self {
        ThreadProgram {
            name: name.to_string(),
            decls: Vec::new(),
            body: Vec::new(),
        }
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn is_local(&self, name: &str) -> bool {
        self.decls.iter().any(|d| d == name)
    }

    /// Canonical source form; `parse_thread` of the result is the identity.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        if !self.decls.is_empty() {
            out.push_str(&format!("local {};\n", self.decls.join(", ")));
        }
        for stmt in &self.body {
            stmt.pretty(0, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Lock(String),
    Unlock(String),
    /// Assignment to a shared location.
    AssignShared { loc: String, expr: Expr },
    /// Assignment to a declared local.
    AssignLocal { local: String, expr: Expr },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    While {
        cond: Expr,
        bound: u32,
        body: Vec<Stmt>,
    },
}

impl Stmt {
    fn pretty(&self, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match &self.kind {
            StmtKind::Lock(l) => out.push_str(&format!("{pad}lock({l});\n")),
            StmtKind::Unlock(l) => out.push_str(&format!("{pad}unlock({l});\n")),
            StmtKind::AssignShared { loc, expr } => {
                out.push_str(&format!("{pad}{loc} = {expr};\n"))
            }
            StmtKind::AssignLocal { local, expr } => {
                out.push_str(&format!("{pad}{local} = {expr};\n"))
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                out.push_str(&format!("{pad}if ({cond}) {{\n"));
                for s in then_branch {
                    s.pretty(indent + 1, out);
                }
                out.push_str(&format!("{pad}}}"));
                if else_branch.is_empty() {
                    out.push('\n');
                } else {
                    out.push_str(" else {\n");
                    for s in else_branch {
                        s.pretty(indent + 1, out);
                    }
                    out.push_str(&format!("{pad}}}\n"));
                }
            }
            StmtKind::While { cond, bound, body } => {
                out.push_str(&format!("{pad}while ({cond}) bound {bound} {{\n"));
                for s in body {
                    s.pretty(indent + 1, out);
                }
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    /// A variable reference, local or shared depending on the declarations.
    Var(String),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    /// Integer semantics; comparisons and logic yield 0/1, arithmetic wraps.
    pub fn eval(self, a: i64, b: i64) -> i64 {
        match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Eq => (a == b) as i64,
            BinOp::Ne => (a != b) as i64,
            BinOp::Lt => (a < b) as i64,
            BinOp::Le => (a <= b) as i64,
            BinOp::And => (a != 0 && b != 0) as i64,
            BinOp::Or => (a != 0 || b != 0) as i64,
        }
    }
}

impl Expr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Not(e) => {
                write!(f, "!")?;
                e.fmt_prec(f, 6)
            }
            Expr::Binary(op, a, b) => {
                let prec = op.precedence();
                let parens = prec < parent;
                if parens {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, prec)?;
                write!(f, " {} ", op.symbol())?;
                // Operators associate left; parenthesize right subtrees of
                // equal precedence.
                b.fmt_prec(f, prec + 1)?;
                if parens {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }

    /// Shared locations read by this expression, left to right, with
    /// duplicates for repeated occurrences.
    pub fn shared_reads(&self, program: &ThreadProgram, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(name) => {
                if !program.is_local(name) {
                    out.push(name.clone());
                }
            }
            Expr::Not(e) => e.shared_reads(program, out),
            Expr::Binary(_, a, b) => {
                a.shared_reads(program, out);
                b.shared_reads(program, out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
