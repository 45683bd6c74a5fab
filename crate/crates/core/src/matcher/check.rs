//! Whole-thread refinement decisions by guided co-enumeration.
//!
//! `check` asks: does every state trace of the transformed thread have a
//! matching state trace of the original? The search never enumerates the
//! original's trace set blindly: the matching constraints pin the original's
//! havoc completely (at a lock, locations the original recently accessed keep
//! their value and the rest must mirror the transformed run's state), so each
//! transformed trace has exactly one candidate, constructed while both
//! threads run side by side.
//!
//! A transformed trace also counts as covered when a matching prefix is
//! followed by a context change at a location the original accessed but the
//! transformed run did not: a context implementing that change would race
//! with the original, whose behavior is then already undefined.

use super::{
    match_state_traces, match_transition_traces, Constraint, MatchReport, Verdict, Witness,
};
use crate::exec::{
    compile_threads, run_portion, take_sync, CompileError, CompiledThread, Cursor, PortionEnd,
};
use crate::state_traces::{
    for_each_havoc, LocSet, SegmentPair, StateTrace, SyncKind, TransitionTrace, TransitionTuple,
};
use crate::symbols::{LocId, State, Symbols};
use crate::thread_lang::{check_well_formed, SyncMode, ThreadProgram, Violation};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Transformed,
    Original,
}

#[derive(Debug, Clone, Error)]
pub enum SessionError {
    #[error("{0}")]
    Compile(#[from] CompileError),
    #[error("{which:?} thread is not well formed: {}", first(.violations))]
    IllFormed {
        which: Which,
        violations: Vec<Violation>,
    },
    #[error("initial-state family has {count} states, over the cap of {cap}")]
    TooManyStates { count: usize, cap: usize },
}

fn first(violations: &[Violation]) -> String {
    violations
        .first()
        .map(|v| v.to_string())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("check exceeded the budget of {max_traces} transformed traces")]
    BudgetExceeded { max_traces: usize },
}

/// Enumeration parameters for `check`/`check_nested`.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    /// Values context havoc may write.
    pub domain: Vec<i64>,
    /// Budget on covered transformed traces.
    pub max_traces: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            domain: vec![0, 1, 2],
            max_traces: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub enum CexTrace {
    Flat(StateTrace),
    Nested(TransitionTrace),
}

impl CexTrace {
    pub fn render(&self, symbols: &Symbols) -> String {
        match self {
            CexTrace::Flat(t) => t.render(symbols),
            CexTrace::Nested(t) => t.render(symbols),
        }
    }
}

/// An uncovered transformed trace (possibly a prefix) plus the report of its
/// unique candidate.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub trace: CexTrace,
    pub report: MatchReport,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub holds: bool,
    /// Transformed traces covered (leaves of the havoc tree).
    pub traces_checked: usize,
    /// Covered by a full match.
    pub matched: usize,
    /// Covered by the prefix-divergence clause.
    pub diverged: usize,
    pub counterexample: Option<Counterexample>,
}

/// How a search run ends internally.
enum Stop {
    Refuted,
    Budget(CheckError),
}

/// A compiled, well-formedness-checked pair of threads sharing one memory
/// universe.
pub struct CheckSession {
    pub symbols: Symbols,
    transformed: CompiledThread,
    original: CompiledThread,
}

impl CheckSession {
    pub fn new(
        transformed: &ThreadProgram,
        original: &ThreadProgram,
        mode: SyncMode,
    ) -> Result<CheckSession, SessionError> {
        for (which, t) in [(Which::Transformed, transformed), (Which::Original, original)] {
            let wf = check_well_formed(t, mode);
            if !wf.is_ok() {
                return Err(SessionError::IllFormed {
                    which,
                    violations: wf.violations,
                });
            }
        }
        let mut symbols = Symbols::new();
        let mut compiled = compile_threads(&[transformed, original], &mut symbols)?;
        let original = compiled.pop().unwrap();
        let transformed = compiled.pop().unwrap();
        Ok(CheckSession {
            symbols,
            transformed,
            original,
        })
    }

    pub fn transformed(&self) -> &CompiledThread {
        &self.transformed
    }

    pub fn original(&self) -> &CompiledThread {
        &self.original
    }

    pub fn zero_state(&self) -> State {
        State::zeroed(self.symbols.num_locs())
    }

    /// Every state over the joint universe with values from `domain`: the
    /// family of states a context may present at the first lock.
    pub fn initial_states(&self, domain: &[i64], cap: usize) -> Result<Vec<State>, SessionError> {
        let count = domain.len().checked_pow(self.symbols.num_locs() as u32);
        match count {
            Some(c) if c <= cap => {}
            _ => {
                return Err(SessionError::TooManyStates {
                    count: count.unwrap_or(usize::MAX),
                    cap,
                })
            }
        }
        let free: Vec<LocId> = self.symbols.locs().collect();
        let mut out = Vec::new();
        for_each_havoc::<std::convert::Infallible>(&self.zero_state(), &free, domain, &mut |s| {
            out.push(s);
            Ok(())
        })
        .unwrap();
        Ok(out)
    }

    /// Refinement decision for flat-lock threads: every state trace of the
    /// transformed thread over `s0s` is covered by a match or by prefix
    /// divergence.
    pub fn check(&self, s0s: &[State], config: &CheckConfig) -> Result<CheckOutcome, CheckError> {
        let mut search = Search {
            session: self,
            config,
            matched: 0,
            diverged: 0,
            cex: None,
        };
        let mut stopped = Ok(());
        for s0 in s0s {
            let node = FlatNode {
                tp_cursor: Cursor::start(&self.transformed),
                tp_state: s0.clone(),
                t_cursor: Some(Cursor::start(&self.original)),
                t_state: s0.clone(),
                tp_segments: Vec::new(),
                t_segments: Vec::new(),
            };
            stopped = search.explore_flat(node, true);
            if stopped.is_err() {
                break;
            }
        }
        search.outcome(stopped)
    }

    /// Refinement decision for nested-lock threads.
    pub fn check_nested(
        &self,
        s0s: &[State],
        config: &CheckConfig,
    ) -> Result<CheckOutcome, CheckError> {
        let mut search = Search {
            session: self,
            config,
            matched: 0,
            diverged: 0,
            cex: None,
        };
        let mut stopped = Ok(());
        for s0 in s0s {
            let node = NestedNode {
                tp_cursor: Cursor::start(&self.transformed),
                tp_state: s0.clone(),
                t_cursor: Some(Cursor::start(&self.original)),
                t_state: s0.clone(),
                tp_trace: empty_trace(),
                t_trace: empty_trace(),
            };
            stopped = search.explore_nested(node, true);
            if stopped.is_err() {
                break;
            }
        }
        search.outcome(stopped)
    }
}

fn empty_trace() -> TransitionTrace {
    TransitionTrace {
        tuples: Vec::new(),
        terminated: false,
    }
}

/// Rests a cursor on its next sync op (or exit) without crossing memory
/// accesses; well-formed threads have none outside portions.
fn probe(thread: &CompiledThread, cursor: &mut Cursor, state: &mut State) -> PortionEnd {
    let mut r = LocSet::new();
    let mut w = LocSet::new();
    let end = run_portion(thread, cursor, state, &mut r, &mut w);
    debug_assert!(r.is_empty() && w.is_empty(), "probe crossed memory accesses");
    end
}

struct FlatNode {
    tp_cursor: Cursor,
    tp_state: State,
    /// `None` once the original thread has terminated.
    t_cursor: Option<Cursor>,
    t_state: State,
    tp_segments: Vec<SegmentPair>,
    t_segments: Vec<SegmentPair>,
}

struct NestedNode {
    tp_cursor: Cursor,
    tp_state: State,
    t_cursor: Option<Cursor>,
    t_state: State,
    tp_trace: TransitionTrace,
    t_trace: TransitionTrace,
}

struct Search<'a> {
    session: &'a CheckSession,
    config: &'a CheckConfig,
    matched: usize,
    diverged: usize,
    cex: Option<Counterexample>,
}

impl Search<'_> {
    fn outcome(self, stopped: Result<(), Stop>) -> Result<CheckOutcome, CheckError> {
        if let Err(Stop::Budget(e)) = stopped {
            return Err(e);
        }
        Ok(CheckOutcome {
            holds: self.cex.is_none(),
            traces_checked: self.matched + self.diverged,
            matched: self.matched,
            diverged: self.diverged,
            counterexample: self.cex,
        })
    }

    fn covered(&mut self, by_divergence: bool) -> Result<(), Stop> {
        if by_divergence {
            self.diverged += 1;
        } else {
            self.matched += 1;
        }
        if self.matched + self.diverged > self.config.max_traces {
            return Err(Stop::Budget(CheckError::BudgetExceeded {
                max_traces: self.config.max_traces,
            }));
        }
        Ok(())
    }

    fn refute(&mut self, trace: CexTrace, report: MatchReport) -> Result<(), Stop> {
        self.cex = Some(Counterexample { trace, report });
        Err(Stop::Refuted)
    }

    fn length_report(index: usize, detail: &str) -> MatchReport {
        MatchReport::mismatch(
            Constraint::Length,
            Witness {
                index,
                location: None,
                values: None,
                detail: detail.to_string(),
            },
        )
    }

    /// Explores every transformed state trace reachable from `node`.
    /// `at_entry` marks the root, where the initial state stands in for the
    /// havoc at the first lock.
    fn explore_flat(&mut self, mut node: FlatNode, at_entry: bool) -> Result<(), Stop> {
        let session = self.session;
        match probe(&session.transformed, &mut node.tp_cursor, &mut node.tp_state) {
            PortionEnd::AtUnlock(_) => unreachable!("flat threads rest on locks"),
            PortionEnd::Terminated => {
                let t_terminated = match node.t_cursor {
                    None => true,
                    Some(ref mut c) => matches!(
                        probe(&session.original, c, &mut node.t_state),
                        PortionEnd::Terminated
                    ),
                };
                let tp = StateTrace {
                    segments: node.tp_segments,
                    terminated: true,
                };
                if !t_terminated {
                    let report = Self::length_report(
                        tp.segments.len(),
                        "transformed thread terminated; original continues at a lock",
                    );
                    return self.refute(CexTrace::Flat(tp), report);
                }
                let t = StateTrace {
                    segments: node.t_segments,
                    terminated: true,
                };
                let report = match_state_traces(&tp, &t, &session.symbols);
                if report.verdict == Verdict::Mismatch {
                    return self.refute(CexTrace::Flat(tp), report);
                }
                self.covered(false)
            }
            PortionEnd::AtLock(_) => {
                let k = node.tp_segments.len();
                let tp_pinned = node
                    .tp_segments
                    .last()
                    .map(|s| s.post_accesses())
                    .unwrap_or_default();
                let t_pinned = node
                    .t_segments
                    .last()
                    .map(|s| s.post_accesses())
                    .unwrap_or_default();
                let free: Vec<LocId> = if at_entry {
                    Vec::new()
                } else {
                    session
                        .symbols
                        .locs()
                        .filter(|l| !tp_pinned.contains(l))
                        .collect()
                };
                // Where the candidate rests; None once it terminated.
                let t_at_lock = match node.t_cursor {
                    None => None,
                    Some(ref mut c) => match probe(&session.original, c, &mut node.t_state) {
                        PortionEnd::AtLock(_) => Some(c.clone()),
                        PortionEnd::Terminated => None,
                        PortionEnd::AtUnlock(_) => unreachable!("flat threads rest on locks"),
                    },
                };

                let base = node.tp_state.clone();
                for_each_havoc(&base, &free, &self.config.domain, &mut |s_k| {
                    // Prefix divergence: the havoc changed a location only
                    // the original accessed since its previous unlock.
                    if k > 0 {
                        let diverges = t_pinned
                            .iter()
                            .filter(|x| !tp_pinned.contains(x))
                            .any(|&x| base.get(x) != s_k.get(x));
                        if diverges {
                            return self.covered(true);
                        }
                    }
                    let mut tp_cursor = node.tp_cursor.clone();
                    let mut tp_state = s_k;
                    let mut tp_segments = node.tp_segments.clone();
                    tp_segments.push(run_flat_segment(
                        &session.transformed,
                        &mut tp_cursor,
                        &mut tp_state,
                    ));

                    // No candidate of this length exists.
                    let Some(t_cursor) = t_at_lock.clone() else {
                        let report = Self::length_report(
                            k,
                            "original thread terminated; transformed continues",
                        );
                        return self.refute(
                            CexTrace::Flat(StateTrace {
                                segments: tp_segments,
                                terminated: false,
                            }),
                            report,
                        );
                    };

                    // Pin the candidate's havoc: carry recently accessed
                    // locations, mirror the transformed state elsewhere.
                    let mut t_state = tp_segments[k].lock_state.clone();
                    for &x in &t_pinned {
                        t_state.set(x, node.t_state.get(x));
                    }
                    let mut t_cursor = t_cursor;
                    let mut t_segments = node.t_segments.clone();
                    t_segments.push(run_flat_segment(
                        &session.original,
                        &mut t_cursor,
                        &mut t_state,
                    ));

                    // The prefix matched up to this boundary, so a mismatch
                    // in the slice points into the new segment.
                    let tp_slice = StateTrace {
                        segments: tp_segments,
                        terminated: false,
                    };
                    let t_slice = StateTrace {
                        segments: t_segments,
                        terminated: false,
                    };
                    let report = match_state_traces(&tp_slice, &t_slice, &session.symbols);
                    if report.verdict == Verdict::Mismatch {
                        return self.refute(CexTrace::Flat(tp_slice), report);
                    }
                    self.explore_flat(
                        FlatNode {
                            tp_cursor,
                            tp_state,
                            t_cursor: Some(t_cursor),
                            t_state,
                            tp_segments: tp_slice.segments,
                            t_segments: t_slice.segments,
                        },
                        false,
                    )
                })
            }
        }
    }

    fn explore_nested(&mut self, mut node: NestedNode, at_entry: bool) -> Result<(), Stop> {
        let session = self.session;
        match probe(&session.transformed, &mut node.tp_cursor, &mut node.tp_state) {
            PortionEnd::Terminated => {
                let t_terminated = match node.t_cursor {
                    None => true,
                    Some(ref mut c) => matches!(
                        probe(&session.original, c, &mut node.t_state),
                        PortionEnd::Terminated
                    ),
                };
                let mut tp = node.tp_trace;
                tp.terminated = true;
                if !t_terminated {
                    let report = Self::length_report(
                        tp.tuples.len(),
                        "transformed thread terminated; original continues",
                    );
                    return self.refute(CexTrace::Nested(tp), report);
                }
                let mut t = node.t_trace;
                t.terminated = true;
                let report = match_transition_traces(&tp, &t, &session.symbols);
                if report.verdict == Verdict::Mismatch {
                    return self.refute(CexTrace::Nested(tp), report);
                }
                self.covered(false)
            }
            PortionEnd::AtUnlock(_) => {
                // No havoc and no window closes at an unlock; co-run one
                // tuple. The candidate's sync kind is fixed, and divergence
                // needs a lock tuple, so a kind mismatch here is terminal.
                let t_rest = match node.t_cursor {
                    None => PortionEnd::Terminated,
                    Some(ref mut c) => probe(&session.original, c, &mut node.t_state),
                };
                let (tp_trace, tp_cursor, tp_state) = run_nested_tuple(
                    &session.transformed,
                    node.tp_cursor,
                    node.tp_state,
                    node.tp_trace,
                );
                match t_rest {
                    PortionEnd::AtUnlock(_) => {}
                    PortionEnd::Terminated => {
                        let report = Self::length_report(
                            tp_trace.tuples.len() - 1,
                            "original thread terminated; transformed continues",
                        );
                        return self.refute(CexTrace::Nested(tp_trace), report);
                    }
                    PortionEnd::AtLock(_) => {
                        let report = MatchReport::mismatch(
                            Constraint::SameLocks,
                            Witness {
                                index: tp_trace.tuples.len() - 1,
                                location: None,
                                values: None,
                                detail: "transformed run unlocks; original locks".to_string(),
                            },
                        );
                        return self.refute(CexTrace::Nested(tp_trace), report);
                    }
                }
                let (t_trace, t_cursor, t_state) = run_nested_tuple(
                    &session.original,
                    node.t_cursor.unwrap(),
                    node.t_state,
                    node.t_trace,
                );
                self.explore_nested(
                    NestedNode {
                        tp_cursor,
                        tp_state,
                        t_cursor: Some(t_cursor),
                        t_state,
                        tp_trace,
                        t_trace,
                    },
                    false,
                )
            }
            PortionEnd::AtLock(_) => {
                // Every open window closes at a lock: evaluate the slice
                // before branching on havoc.
                let report =
                    match_transition_traces(&node.tp_trace, &node.t_trace, &session.symbols);
                if report.verdict == Verdict::Mismatch {
                    return self.refute(CexTrace::Nested(node.tp_trace), report);
                }
                let i = node.tp_trace.tuples.len();
                let (tp_window, t_window) = if i == 0 {
                    (LocSet::new(), LocSet::new())
                } else {
                    let jp = node.tp_trace.prev_unlock(i - 1);
                    let j = node.t_trace.prev_unlock(i - 1);
                    (
                        node.tp_trace.access_window(jp, i as isize - 1),
                        node.t_trace.access_window(j, i as isize - 1),
                    )
                };
                let free: Vec<LocId> = if at_entry {
                    Vec::new()
                } else {
                    session
                        .symbols
                        .locs()
                        .filter(|l| !tp_window.contains(l))
                        .collect()
                };
                let t_rest = match node.t_cursor {
                    None => PortionEnd::Terminated,
                    Some(ref mut c) => probe(&session.original, c, &mut node.t_state),
                };
                if matches!(t_rest, PortionEnd::AtUnlock(_)) {
                    let report = MatchReport::mismatch(
                        Constraint::SameLocks,
                        Witness {
                            index: i,
                            location: None,
                            values: None,
                            detail: "transformed run locks; original unlocks".to_string(),
                        },
                    );
                    return self.refute(CexTrace::Nested(node.tp_trace), report);
                }

                let base = node.tp_state.clone();
                for_each_havoc(&base, &free, &self.config.domain, &mut |s_i| {
                    if i > 0 {
                        let diverges = t_window
                            .iter()
                            .filter(|x| !tp_window.contains(x))
                            .any(|&x| base.get(x) != s_i.get(x));
                        if diverges {
                            return self.covered(true);
                        }
                    }
                    let (tp_trace, tp_cursor, tp_state) = run_nested_tuple(
                        &session.transformed,
                        node.tp_cursor.clone(),
                        s_i,
                        node.tp_trace.clone(),
                    );
                    if matches!(t_rest, PortionEnd::Terminated) {
                        let report = Self::length_report(
                            i,
                            "original thread terminated; transformed continues",
                        );
                        return self.refute(CexTrace::Nested(tp_trace), report);
                    }
                    let mut t_state = tp_trace.tuples[i].pre_state.clone();
                    for &x in &t_window {
                        t_state.set(x, node.t_state.get(x));
                    }
                    let (t_trace, t_cursor, t_state) = run_nested_tuple(
                        &session.original,
                        node.t_cursor.clone().unwrap(),
                        t_state,
                        node.t_trace.clone(),
                    );
                    self.explore_nested(
                        NestedNode {
                            tp_cursor,
                            tp_state,
                            t_cursor: Some(t_cursor),
                            t_state,
                            tp_trace,
                            t_trace,
                        },
                        false,
                    )
                })
            }
        }
    }
}

/// Runs one lock..next-lock segment of a flat thread.
fn run_flat_segment(
    thread: &CompiledThread,
    cursor: &mut Cursor,
    state: &mut State,
) -> SegmentPair {
    let lock_state = state.clone();
    let PortionEnd::AtLock(lock) = take_sync(thread, cursor) else {
        panic!("segment must start at a lock");
    };
    let mut cs_reads = LocSet::new();
    let mut cs_writes = LocSet::new();
    let end = run_portion(thread, cursor, state, &mut cs_reads, &mut cs_writes);
    assert!(matches!(end, PortionEnd::AtUnlock(_)));
    let unlock_state = state.clone();
    take_sync(thread, cursor);
    let mut post_reads = LocSet::new();
    let mut post_writes = LocSet::new();
    run_portion(thread, cursor, state, &mut post_reads, &mut post_writes);
    SegmentPair {
        lock,
        lock_state,
        cs_reads,
        cs_writes,
        unlock_state,
        post_reads,
        post_writes,
        post_state: state.clone(),
    }
}

/// Executes the sync op under the cursor plus its portion, appending a tuple.
fn run_nested_tuple(
    thread: &CompiledThread,
    mut cursor: Cursor,
    mut state: State,
    mut trace: TransitionTrace,
) -> (TransitionTrace, Cursor, State) {
    let pre_state = state.clone();
    let (lock, op) = match take_sync(thread, &mut cursor) {
        PortionEnd::AtLock(l) => (l, SyncKind::Lock),
        PortionEnd::AtUnlock(l) => (l, SyncKind::Unlock),
        PortionEnd::Terminated => unreachable!(),
    };
    let mut reads = LocSet::new();
    let mut writes = LocSet::new();
    run_portion(thread, &mut cursor, &mut state, &mut reads, &mut writes);
    trace.tuples.push(TransitionTuple {
        lock,
        op,
        pre_state,
        reads,
        writes,
        post_state: state.clone(),
    });
    (trace, cursor, state)
}
