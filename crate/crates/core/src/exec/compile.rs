//! Compilation of thread ASTs into flat micro-op programs.
//!
//! Each micro-op is either one shared-memory access, one lock operation, or a
//! pure local computation (register move, branch, jump). Shared reads inside
//! expressions are hoisted into fresh registers in left-to-right order, so an
//! executed micro-op touches at most one shared location. This is what makes
//! "one transition step accesses exactly one shared location or performs one
//! lock operation" hold by construction.

use crate::symbols::{LocId, LockId, Symbols};
use crate::thread_lang::{BinOp, Expr, Stmt, StmtKind, ThreadProgram};
use std::collections::HashSet;
use thiserror::Error;

pub(crate) type Reg = usize;

/// Pure expression over registers and constants.
#[derive(Debug, Clone)]
pub(crate) enum PExpr {
    Const(i64),
    Reg(Reg),
    Not(Box<PExpr>),
    Bin(BinOp, Box<PExpr>, Box<PExpr>),
}

impl PExpr {
    pub(crate) fn eval(&self, regs: &[i64]) -> i64 {
        match self {
            PExpr::Const(v) => *v,
            PExpr::Reg(r) => regs[*r],
            PExpr::Not(e) => (e.eval(regs) == 0) as i64,
            PExpr::Bin(op, a, b) => op.eval(a.eval(regs), b.eval(regs)),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Lock(LockId),
    Unlock(LockId),
    /// Shared read into a register.
    Read { loc: LocId, dst: Reg },
    /// Shared write; the value is pure.
    Write { loc: LocId, src: PExpr },
    /// Pure register assignment (not an execution step).
    Set { dst: Reg, src: PExpr },
    /// Jump to `target` when `cond` evaluates to 0 (not a step).
    BranchZero { cond: PExpr, target: usize },
    /// Unconditional jump (not a step).
    Jump(usize),
}

/// A thread lowered to micro-ops.
#[derive(Debug, Clone)]
pub struct CompiledThread {
    pub name: String,
    pub(crate) ops: Vec<Op>,
    pub(crate) num_regs: usize,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("identifier '{name}' is a lock in one thread and a location in another")]
    NamespaceClash { name: String },
}

struct Compiler<'a> {
    program: &'a ThreadProgram,
    symbols: &'a mut Symbols,
    ops: Vec<Op>,
    num_regs: usize,
}

impl Compiler<'_> {
    fn local_reg(&self, name: &str) -> Reg {
        self.program
            .decls
            .iter()
            .position(|d| d == name)
            .expect("assignment target was classified as local by the parser")
    }

    fn fresh_reg(&mut self) -> Reg {
        let r = self.num_regs;
        self.num_regs += 1;
        r
    }

    /// Emits the shared reads of `expr` and returns its pure residue.
    fn lower_expr(&mut self, expr: &Expr) -> PExpr {
        match expr {
            Expr::Int(v) => PExpr::Const(*v),
            Expr::Var(name) => {
                if self.program.is_local(name) {
                    PExpr::Reg(self.local_reg(name))
                } else {
                    let loc = self.symbols.intern_loc(name);
                    let dst = self.fresh_reg();
                    self.ops.push(Op::Read { loc, dst });
                    PExpr::Reg(dst)
                }
            }
            Expr::Not(e) => PExpr::Not(Box::new(self.lower_expr(e))),
            Expr::Binary(op, a, b) => {
                let pa = self.lower_expr(a);
                let pb = self.lower_expr(b);
                PExpr::Bin(*op, Box::new(pa), Box::new(pb))
            }
        }
    }

    fn lower_block(&mut self, stmts: &[Stmt]) {
        for stmt in stmts {
            self.lower_stmt(stmt);
        }
    }

    fn lower_stmt(&mut self, stmt: &Stmt) {
        match &stmt.kind {
            StmtKind::Lock(l) => {
                let id = self.symbols.intern_lock(l);
                self.ops.push(Op::Lock(id));
            }
            StmtKind::Unlock(l) => {
                let id = self.symbols.intern_lock(l);
                self.ops.push(Op::Unlock(id));
            }
            StmtKind::AssignShared { loc, expr } => {
                let src = self.lower_expr(expr);
                let loc = self.symbols.intern_loc(loc);
                self.ops.push(Op::Write { loc, src });
            }
            StmtKind::AssignLocal { local, expr } => {
                let src = self.lower_expr(expr);
                let dst = self.local_reg(local);
                self.ops.push(Op::Set { dst, src });
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let cond = self.lower_expr(cond);
                let branch_at = self.ops.len();
                self.ops.push(Op::Jump(0)); // placeholder
                self.lower_block(then_branch);
                if else_branch.is_empty() {
                    let end = self.ops.len();
                    self.ops[branch_at] = Op::BranchZero { cond, target: end };
                } else {
                    let jump_at = self.ops.len();
                    self.ops.push(Op::Jump(0)); // placeholder
                    let else_start = self.ops.len();
                    self.ops[branch_at] = Op::BranchZero {
                        cond,
                        target: else_start,
                    };
                    self.lower_block(else_branch);
                    let end = self.ops.len();
                    self.ops[jump_at] = Op::Jump(end);
                }
            }
            StmtKind::While { cond, bound, body } => {
                // counter := 0; head: exit if counter >= bound or !cond;
                // body; counter += 1; jump head
                let counter = self.fresh_reg();
                self.ops.push(Op::Set {
                    dst: counter,
                    src: PExpr::Const(0),
                });
                let head = self.ops.len();
                let bound_check_at = self.ops.len();
                self.ops.push(Op::Jump(0)); // placeholder
                let cond = self.lower_expr(cond);
                let cond_check_at = self.ops.len();
                self.ops.push(Op::Jump(0)); // placeholder
                self.lower_block(body);
                self.ops.push(Op::Set {
                    dst: counter,
                    src: PExpr::Bin(
                        BinOp::Add,
                        Box::new(PExpr::Reg(counter)),
                        Box::new(PExpr::Const(1)),
                    ),
                });
                self.ops.push(Op::Jump(head));
                let exit = self.ops.len();
                self.ops[bound_check_at] = Op::BranchZero {
                    cond: PExpr::Bin(
                        BinOp::Lt,
                        Box::new(PExpr::Reg(counter)),
                        Box::new(PExpr::Const(*bound as i64)),
                    ),
                    target: exit,
                };
                self.ops[cond_check_at] = Op::BranchZero { cond, target: exit };
            }
        }
    }
}

/// Lowers one thread, interning its names into `symbols`.
pub fn compile_thread(program: &ThreadProgram, symbols: &mut Symbols) -> CompiledThread {
    let mut compiler = Compiler {
        program,
        symbols,
        ops: Vec::new(),
        num_regs: program.decls.len(),
    };
    compiler.lower_block(&program.body);
    CompiledThread {
        name: program.name.clone(),
        ops: compiler.ops,
        num_regs: compiler.num_regs,
    }
}

/// Lowers a set of threads into one shared symbol table, enforcing that lock
/// and location namespaces stay disjoint across the whole program.
pub fn compile_threads(
    threads: &[&ThreadProgram],
    symbols: &mut Symbols,
) -> Result<Vec<CompiledThread>, CompileError> {
    let mut locks: HashSet<String> = HashSet::new();
    let mut locs: HashSet<String> = HashSet::new();

    fn collect(stmts: &[Stmt], program: &ThreadProgram, locks: &mut HashSet<String>, locs: &mut HashSet<String>) {
        fn expr_locs(e: &Expr, program: &ThreadProgram, locs: &mut HashSet<String>) {
            match e {
                Expr::Int(_) => {}
                Expr::Var(n) => {
                    if !program.is_local(n) {
                        locs.insert(n.clone());
                    }
                }
                Expr::Not(e) => expr_locs(e, program, locs),
                Expr::Binary(_, a, b) => {
                    expr_locs(a, program, locs);
                    expr_locs(b, program, locs);
                }
            }
        }
        for s in stmts {
            match &s.kind {
                StmtKind::Lock(l) | StmtKind::Unlock(l) => {
                    locks.insert(l.clone());
                }
                StmtKind::AssignShared { loc, expr } => {
                    locs.insert(loc.clone());
                    expr_locs(expr, program, locs);
                }
                StmtKind::AssignLocal { expr, .. } => expr_locs(expr, program, locs),
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    expr_locs(cond, program, locs);
                    collect(then_branch, program, locks, locs);
                    collect(else_branch, program, locks, locs);
                }
                StmtKind::While { cond, body, .. } => {
                    expr_locs(cond, program, locs);
                    collect(body, program, locks, locs);
                }
            }
        }
    }

    for t in threads {
        collect(&t.body, t, &mut locks, &mut locs);
    }
    if let Some(name) = locks.intersection(&locs).next() {
        return Err(CompileError::NamespaceClash { name: name.clone() });
    }
    Ok(threads.iter().map(|t| compile_thread(t, symbols)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thread_lang::parse_thread;

    #[test]
    fn expression_reads_are_hoisted_left_to_right() {
        let t = parse_thread("lock(l); z = x + y * x; unlock(l);").unwrap();
        let mut syms = Symbols::new();
        let c = compile_thread(&t, &mut syms);
        let reads: Vec<&str> = c
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::Read { loc, .. } => Some(syms.loc_name(*loc)),
                _ => None,
            })
            .collect();
        assert_eq!(reads, vec!["x", "y", "x"]);
    }

    #[test]
    fn cross_thread_namespace_clash_detected() {
        let a = parse_thread("lock(l); unlock(l);").unwrap();
        let b = parse_thread("lock(m); l = 1; unlock(m);").unwrap();
        let mut syms = Symbols::new();
        let err = compile_threads(&[&a, &b], &mut syms).unwrap_err();
        assert_eq!(err, CompileError::NamespaceClash { name: "l".into() });
    }
}
