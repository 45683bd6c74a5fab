//! Structural well-formedness of threads.
//!
//! The execution model assumes the first operation a thread performs is a
//! lock acquisition and that critical sections are properly closed. The
//! checker walks every syntactic path (all branch combinations, any number of
//! loop iterations) with an abstract lock state and reports violations as
//! data, not errors.

use super::{Expr, Span, Stmt, StmtKind, ThreadProgram};
use std::collections::BTreeSet;
use std::fmt;

/// Which locking discipline to check against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    /// Locks never nest: lock/unlock strictly alternate, the first operation
    /// of the thread is a lock and the last synchronization is an unlock.
    NonNested,
    /// Locks may nest: acquisitions are balanced per lock on every path, no
    /// lock is re-acquired while held, and the first operation is still a
    /// synchronization.
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A shared memory access occurs before the first lock operation.
    FirstOpNotLock,
    /// A lock is taken while another is held (non-nested mode only).
    NestedLock,
    /// A lock is acquired while already held.
    Reacquired,
    /// An unlock names a lock that is not (or not the one) currently held.
    UnlockNotHeld,
    /// Some path exits the thread with a lock still held.
    HeldAtExit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub span: Span,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.detail)
    }
}

/// Verdict of [`check_well_formed`]: ok iff `violations` is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellFormedness {
    pub mode: SyncMode,
    pub violations: Vec<Violation>,
}

impl WellFormedness {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Abstract lock state along one syntactic path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Abs {
    held: Vec<String>, // acquisition order; tiny in practice
    synced: bool,      // has the first lock happened yet
}

struct Walker<'a> {
    mode: SyncMode,
    program: &'a ThreadProgram,
    violations: Vec<Violation>,
}

impl Walker<'_> {
    fn report(&mut self, kind: ViolationKind, span: Span, detail: String) {
        if !self
            .violations
            .iter()
            .any(|v| v.kind == kind && v.span == span)
        {
            self.violations.push(Violation { kind, span, detail });
        }
    }

    fn touch_shared(&mut self, expr: &Expr, span: Span, abs: &Abs) {
        let mut reads = Vec::new();
        expr.shared_reads(self.program, &mut reads);
        if !reads.is_empty() && !abs.synced {
            self.report(
                ViolationKind::FirstOpNotLock,
                span,
                format!("first operation not lock: read of '{}'", reads[0]),
            );
        }
    }

    fn step(&mut self, stmt: &Stmt, abs: &Abs) -> BTreeSet<Abs> {
        let mut out = BTreeSet::new();
        match &stmt.kind {
            StmtKind::Lock(l) => {
                let mut next = abs.clone();
                match self.mode {
                    SyncMode::NonNested if !abs.held.is_empty() => {
                        self.report(
                            ViolationKind::NestedLock,
                            stmt.span,
                            format!("lock({l}) taken while holding lock({})", abs.held[0]),
                        );
                        next.held.push(l.clone()); // keep tracking to avoid cascades
                    }
                    _ if abs.held.contains(l) => {
                        self.report(
                            ViolationKind::Reacquired,
                            stmt.span,
                            format!("lock({l}) re-acquired while held"),
                        );
                    }
                    _ => next.held.push(l.clone()),
                }
                next.synced = true;
                out.insert(next);
            }
            StmtKind::Unlock(l) => {
                let mut next = abs.clone();
                if let Some(i) = abs.held.iter().position(|h| h == l) {
                    next.held.remove(i);
                } else {
                    let what = if abs.synced && !abs.held.is_empty() {
                        format!("unlock({l}) does not match held lock({})", abs.held[0])
                    } else {
                        format!("unlock({l}) without holding it")
                    };
                    self.report(ViolationKind::UnlockNotHeld, stmt.span, what);
                }
                out.insert(next);
            }
            StmtKind::AssignShared { loc, expr } => {
                if !abs.synced {
                    self.report(
                        ViolationKind::FirstOpNotLock,
                        stmt.span,
                        format!("first operation not lock: write to '{loc}'"),
                    );
                }
                self.touch_shared(expr, stmt.span, abs);
                out.insert(abs.clone());
            }
            StmtKind::AssignLocal { expr, .. } => {
                self.touch_shared(expr, stmt.span, abs);
                out.insert(abs.clone());
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.touch_shared(cond, stmt.span, abs);
                let mut states = BTreeSet::from([abs.clone()]);
                states = self.walk(then_branch, &states);
                let mut else_states = BTreeSet::from([abs.clone()]);
                else_states = self.walk(else_branch, &else_states);
                out.extend(states);
                out.extend(else_states);
            }
            StmtKind::While { cond, bound, body } => {
                self.touch_shared(cond, stmt.span, abs);
                let mut seen = BTreeSet::from([abs.clone()]);
                if *bound > 0 {
                    // Fixpoint over reachable lock states; the loop body
                    // taken 0..bound times can only visit these.
                    let mut frontier = seen.clone();
                    loop {
                        let next = self.walk(body, &frontier);
                        let fresh: BTreeSet<Abs> =
                            next.difference(&seen).cloned().collect();
                        if fresh.is_empty() {
                            break;
                        }
                        for s in &fresh {
                            self.touch_shared(cond, stmt.span, s);
                        }
                        seen.extend(fresh.iter().cloned());
                        frontier = fresh;
                    }
                }
                out.extend(seen);
            }
        }
        out
    }

    fn walk(&mut self, stmts: &[Stmt], states: &BTreeSet<Abs>) -> BTreeSet<Abs> {
        let mut current = states.clone();
        for stmt in stmts {
            let mut next = BTreeSet::new();
            for abs in &current {
                next.extend(self.step(stmt, abs));
            }
            current = next;
        }
        current
    }
}

/// Checks the thread against the locking discipline of `mode`.
pub fn check_well_formed(program: &ThreadProgram, mode: SyncMode) -> WellFormedness {
    let mut walker = Walker {
        mode,
        program,
        violations: Vec::new(),
    };
    let start = Abs {
        held: Vec::new(),
        synced: false,
    };
    let finals = walker.walk(&program.body, &BTreeSet::from([start]));
    let exit_span = program
        .body
        .last()
        .map(|s| s.span)
        .unwrap_or(Span { line: 1, col: 1 });
    for abs in &finals {
        if let Some(l) = abs.held.first() {
            walker.report(
                ViolationKind::HeldAtExit,
                exit_span,
                format!("lock({l}) still held at thread exit"),
            );
        }
    }
    WellFormedness {
        mode,
        violations: walker.violations,
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_thread;
    use super::*;

    fn wf(src: &str, mode: SyncMode) -> WellFormedness {
        check_well_formed(&parse_thread(src).unwrap(), mode)
    }

    #[test]
    fn original_thread_is_well_formed() {
        let src = "local a, b;\nlock(l); x = 1; x = 2; unlock(l); a = x; b = y; lock(l); if (b == 0) { x = 0; } unlock(l);";
        assert!(wf(src, SyncMode::NonNested).is_ok());
        assert!(wf(src, SyncMode::Nested).is_ok());
    }

    #[test]
    fn leading_write_violates() {
        let r = wf("x = 1; lock(l); unlock(l);", SyncMode::NonNested);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::FirstOpNotLock);
    }

    #[test]
    fn nesting_splits_the_modes() {
        let src = "lock(l); lock(m); unlock(m); unlock(l);";
        let non_nested = wf(src, SyncMode::NonNested);
        assert!(!non_nested.is_ok());
        assert_eq!(non_nested.violations[0].kind, ViolationKind::NestedLock);
        assert!(wf(src, SyncMode::Nested).is_ok());
    }

    #[test]
    fn unlock_mismatch_and_exit_hold() {
        let r = wf("lock(l); unlock(m);", SyncMode::NonNested);
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::UnlockNotHeld));
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::HeldAtExit));
    }

    #[test]
    fn reacquire_rejected_in_nested_mode() {
        let r = wf("lock(l); lock(l); unlock(l); unlock(l);", SyncMode::Nested);
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Reacquired));
    }

    #[test]
    fn branch_paths_checked_separately() {
        // The else path exits the section, then unlocks again at the join.
        let src = "local a;\nlock(l); if (a == 0) { x = 1; } else { unlock(l); } unlock(l);";
        let r = wf(src, SyncMode::NonNested);
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::UnlockNotHeld));
    }

    #[test]
    fn loop_paths_reach_fixpoint() {
        // One iteration leaves the lock held at loop exit on some paths.
        let src = "local a;\nwhile (a < 2) bound 3 { lock(l); }";
        let r = wf(src, SyncMode::Nested);
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Reacquired || v.kind == ViolationKind::HeldAtExit));
    }

    #[test]
    fn empty_and_local_only_threads_are_ok() {
        assert!(wf("", SyncMode::NonNested).is_ok());
        assert!(wf("local a; a = 1; a = a + 1;", SyncMode::NonNested).is_ok());
    }

    #[test]
    fn non_nested_ok_implies_nested_ok() {
        let cases = [
            "lock(l); x = 1; unlock(l);",
            "lock(l); unlock(l); y = 2; lock(m); unlock(m); y = 3;",
            "local a;\nlock(l); a = x; unlock(l); a = a + 1;",
        ];
        for src in cases {
            assert!(wf(src, SyncMode::NonNested).is_ok(), "{src}");
            assert!(wf(src, SyncMode::Nested).is_ok(), "{src}");
        }
    }
}
