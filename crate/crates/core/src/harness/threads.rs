//! Random thread programs and refinement pairs for semantic sampling.
//!
//! These programs are intentionally tiny (a few lock sections over a handful
//! of locations, constant assignments, local reads, branches on locals) so
//! interleaving spaces and trace sets stay exhaustively enumerable. All
//! values stay inside the configured pool, so a finite havoc domain covers
//! every state such a program can meet.

use crate::thread_lang::{BinOp, Expr, Span, Stmt, StmtKind, ThreadProgram};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ThreadGenConfig {
    /// Shared locations `x0..`.
    pub locations: usize,
    /// Lock name pool `l0..`.
    pub locks: usize,
    /// Inclusive range of lock sections per thread.
    pub sections: (usize, usize),
    /// Inclusive range of statements per portion (section interior or gap).
    pub stmts_per_portion: (usize, usize),
    /// Constants assignments may write.
    pub values: Vec<i64>,
    /// Probability that a gap (outside any section) receives accesses at
    /// all; unlocked accesses are what makes programs racy.
    pub unlocked_access_prob: f64,
    /// Probability that a section contains a branch on a local.
    pub branch_prob: f64,
}

impl Default for ThreadGenConfig {
    fn default() -> Self {
        ThreadGenConfig {
            locations: 3,
            locks: 2,
            sections: (1, 2),
            stmts_per_portion: (0, 2),
            values: vec![0, 1, 2],
            unlocked_access_prob: 0.4,
            branch_prob: 0.3,
        }
    }
}

const LOCALS: [&str; 2] = ["a", "b"];

fn span() -> Span {
    Span { line: 0, col: 0 }
}

fn stmt(kind: StmtKind) -> Stmt {
    Stmt { kind, span: span() }
}

fn loc_name(i: usize) -> String {
    format!("x{i}")
}

fn write_stmt(cfg: &ThreadGenConfig, rng: &mut ChaCha8Rng) -> Stmt {
    stmt(StmtKind::AssignShared {
        loc: loc_name(rng.gen_range(0..cfg.locations)),
        expr: Expr::Int(*cfg.values.choose(rng).unwrap()),
    })
}

fn read_stmt(cfg: &ThreadGenConfig, rng: &mut ChaCha8Rng) -> Stmt {
    stmt(StmtKind::AssignLocal {
        local: LOCALS[rng.gen_range(0..LOCALS.len())].to_string(),
        expr: Expr::Var(loc_name(rng.gen_range(0..cfg.locations))),
    })
}

fn branch_stmt(cfg: &ThreadGenConfig, rng: &mut ChaCha8Rng) -> Stmt {
    let cond = Expr::Binary(
        BinOp::Eq,
        Box::new(Expr::Var(LOCALS[rng.gen_range(0..LOCALS.len())].to_string())),
        Box::new(Expr::Int(*cfg.values.choose(rng).unwrap())),
    );
    stmt(StmtKind::If {
        cond,
        then_branch: vec![write_stmt(cfg, rng)],
        else_branch: if rng.gen_bool(0.5) {
            vec![write_stmt(cfg, rng)]
        } else {
            Vec::new()
        },
    })
}

fn portion(cfg: &ThreadGenConfig, rng: &mut ChaCha8Rng, allow_branch: bool) -> Vec<Stmt> {
    let n = rng.gen_range(cfg.stmts_per_portion.0..=cfg.stmts_per_portion.1);
    (0..n)
        .map(|_| {
            if allow_branch && rng.gen_bool(cfg.branch_prob) {
                branch_stmt(cfg, rng)
            } else if rng.gen_bool(0.5) {
                write_stmt(cfg, rng)
            } else {
                read_stmt(cfg, rng)
            }
        })
        .collect()
}

/// One well-formed (non-nested) random thread.
pub fn gen_thread(cfg: &ThreadGenConfig, rng: &mut ChaCha8Rng, name: &str) -> ThreadProgram {
    let sections = rng.gen_range(cfg.sections.0..=cfg.sections.1);
    let mut body = Vec::new();
    for _ in 0..sections {
        let lock = format!("l{}", rng.gen_range(0..cfg.locks));
        body.push(stmt(StmtKind::Lock(lock.clone())));
        body.extend(portion(cfg, rng, true));
        body.push(stmt(StmtKind::Unlock(lock)));
        if rng.gen_bool(cfg.unlocked_access_prob) {
            body.extend(portion(cfg, rng, false));
        }
    }
    ThreadProgram {
        name: name.to_string(),
        decls: LOCALS.iter().map(|s| s.to_string()).collect(),
        body,
    }
}

/// A parallel composition of random threads.
pub fn gen_program(
    cfg: &ThreadGenConfig,
    rng: &mut ChaCha8Rng,
    n_threads: usize,
) -> Vec<ThreadProgram> {
    (0..n_threads)
        .map(|i| gen_thread(cfg, rng, &format!("t{i}")))
        .collect()
}

/// Kinds of program-level rewrites used to produce refinement pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriteKind {
    /// Move the statement before a lock (or after an unlock) into the
    /// section; program order of accesses is unchanged.
    RoachMotel,
    /// Drop a shared write immediately overwritten in the same portion.
    EliminateOverwrittenWrite,
    /// Swap two adjacent independent statements of one portion.
    ReorderIndependent,
    /// Move a section-final write out past the unlock when the following gap
    /// writes the same location anyway and never reads it.
    InverseRoachMotel,
}

const REWRITES: [RewriteKind; 4] = [
    RewriteKind::RoachMotel,
    RewriteKind::EliminateOverwrittenWrite,
    RewriteKind::ReorderIndependent,
    RewriteKind::InverseRoachMotel,
];

fn written_loc(s: &Stmt) -> Option<&str> {
    match &s.kind {
        StmtKind::AssignShared { loc, .. } => Some(loc),
        _ => None,
    }
}

fn read_locs(s: &Stmt) -> Vec<&str> {
    let mut out = Vec::new();
    if let StmtKind::AssignShared { expr, .. } | StmtKind::AssignLocal { expr, .. } = &s.kind {
        collect_reads(expr, &mut out);
    }
    out
}

fn collect_reads<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
    match e {
        Expr::Int(_) => {}
        Expr::Var(v) => out.push(v),
        Expr::Not(e) => collect_reads(e, out),
        Expr::Binary(_, a, b) => {
            collect_reads(a, out);
            collect_reads(b, out);
        }
    }
}

fn local_of(s: &Stmt) -> Option<&str> {
    match &s.kind {
        StmtKind::AssignLocal { local, .. } => Some(local),
        _ => None,
    }
}

/// A plain statement safe to move or reorder (no control flow).
fn is_simple(s: &Stmt) -> bool {
    matches!(
        s.kind,
        StmtKind::AssignShared { .. } | StmtKind::AssignLocal { .. }
    )
}

/// Tries one rewrite of `kind` at a random opportunity; `None` when it has
/// no applicable site.
pub fn apply_rewrite(
    thread: &ThreadProgram,
    kind: RewriteKind,
    rng: &mut ChaCha8Rng,
) -> Option<ThreadProgram> {
    let body = &thread.body;
    let mut candidates: Vec<Vec<Stmt>> = Vec::new();
    match kind {
        RewriteKind::RoachMotel => {
            for i in 0..body.len() {
                // Statement right before a lock moves to the section start.
                if i + 1 < body.len()
                    && is_simple(&body[i])
                    && matches!(body[i + 1].kind, StmtKind::Lock(_))
                {
                    let mut next = body.clone();
                    next.swap(i, i + 1);
                    candidates.push(next);
                }
                // Statement right after an unlock moves before it.
                if i > 0
                    && is_simple(&body[i])
                    && matches!(body[i - 1].kind, StmtKind::Unlock(_))
                {
                    let mut next = body.clone();
                    next.swap(i - 1, i);
                    candidates.push(next);
                }
            }
        }
        RewriteKind::EliminateOverwrittenWrite => {
            for i in 0..body.len().saturating_sub(1) {
                let (Some(a), Some(b)) = (written_loc(&body[i]), written_loc(&body[i + 1])) else {
                    continue;
                };
                if a == b {
                    let mut next = body.clone();
                    next.remove(i);
                    candidates.push(next);
                }
            }
        }
        RewriteKind::ReorderIndependent => {
            for i in 0..body.len().saturating_sub(1) {
                let (a, b) = (&body[i], &body[i + 1]);
                if !is_simple(a) || !is_simple(b) {
                    continue;
                }
                // Disjoint shared footprints and disjoint locals.
                let a_locs: Vec<&str> = read_locs(a)
                    .into_iter()
                    .chain(written_loc(a))
                    .filter(|n| !thread.is_local(n))
                    .collect();
                let b_locs: Vec<&str> = read_locs(b)
                    .into_iter()
                    .chain(written_loc(b))
                    .filter(|n| !thread.is_local(n))
                    .collect();
                let shared_conflict = a_locs.iter().any(|x| {
                    b_locs.contains(x)
                        && (written_loc(a) == Some(*x) || written_loc(b) == Some(*x))
                });
                let local_conflict = match (local_of(a), local_of(b)) {
                    (Some(la), Some(lb)) => la == lb,
                    (Some(la), None) => read_locs(b).contains(&la),
                    (None, Some(lb)) => read_locs(a).contains(&lb),
                    (None, None) => false,
                };
                if !shared_conflict && !local_conflict {
                    let mut next = body.clone();
                    next.swap(i, i + 1);
                    candidates.push(next);
                }
            }
        }
        RewriteKind::InverseRoachMotel => {
            for i in 0..body.len() {
                // body[i] = write x; body[i+1] = unlock; and the gap after
                // writes x without reading it first.
                let Some(x) = written_loc(&body[i]) else {
                    continue;
                };
                if read_locs(&body[i]).iter().any(|n| !thread.is_local(n)) {
                    continue; // keep the moved statement's reads out of it
                }
                if i + 1 >= body.len() || !matches!(body[i + 1].kind, StmtKind::Unlock(_)) {
                    continue;
                }
                let mut writes_x = false;
                let mut reads_x = false;
                for s in &body[i + 2..] {
                    if matches!(s.kind, StmtKind::Lock(_)) {
                        break;
                    }
                    if read_locs(s).contains(&x) {
                        reads_x = true;
                    }
                    if written_loc(s) == Some(x) {
                        writes_x = true;
                    }
                }
                if writes_x && !reads_x {
                    let mut next = body.clone();
                    next.swap(i, i + 1);
                    candidates.push(next);
                }
            }
        }
    }
    let body = candidates.choose(rng)?.clone();
    Some(ThreadProgram {
        name: format!("{}_rw", thread.name),
        decls: thread.decls.clone(),
        body,
    })
}

/// Produces a transformed version of `original` by 1..=3 random rewrites
/// (possibly the identity when nothing applies).
pub fn gen_transformed(
    original: &ThreadProgram,
    rng: &mut ChaCha8Rng,
) -> (ThreadProgram, Vec<RewriteKind>) {
    let mut current = original.clone();
    let mut applied = Vec::new();
    let n = rng.gen_range(1..=3);
    for _ in 0..n {
        let kind = *REWRITES.choose(rng).unwrap();
        if let Some(next) = apply_rewrite(&current, kind, rng) {
            current = next;
            applied.push(kind);
        }
    }
    current.name = format!("{}_t", original.name);
    (current, applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thread_lang::{check_well_formed, SyncMode};

    #[test]
    fn generated_threads_are_well_formed() {
        let cfg = ThreadGenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..50 {
            let t = gen_thread(&cfg, &mut rng, &format!("t{i}"));
            assert!(
                check_well_formed(&t, SyncMode::NonNested).is_ok(),
                "{}",
                t.pretty()
            );
        }
    }

    #[test]
    fn rewrites_preserve_well_formedness() {
        let cfg = ThreadGenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..50 {
            let t = gen_thread(&cfg, &mut rng, &format!("t{i}"));
            let (rewritten, _) = gen_transformed(&t, &mut rng);
            assert!(
                check_well_formed(&rewritten, SyncMode::NonNested).is_ok(),
                "{}",
                rewritten.pretty()
            );
        }
    }

    #[test]
    fn roach_motel_moves_into_the_section() {
        let t = crate::thread_lang::parse_thread("lock(l); x0 = 1; unlock(l); x1 = 2;").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let moved = apply_rewrite(&t, RewriteKind::RoachMotel, &mut rng).unwrap();
        assert!(matches!(moved.body[2].kind, StmtKind::AssignShared { ref loc, .. } if loc == "x1"));
        assert!(matches!(moved.body[3].kind, StmtKind::Unlock(_)));
    }
}
