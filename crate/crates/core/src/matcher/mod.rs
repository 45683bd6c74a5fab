//! Trace matching and refinement checking.
//!
//! Two runs correspond when they agree on the states a race-free context
//! could observe at synchronization operations and the transformed run does
//! not touch locations outside what the original touched nearby (so it allows
//! no new data races). [`match_state_traces`] decides this for flat-lock
//! state traces, [`match_transition_traces`] for nested-lock transition
//! traces. [`check_trace_pair`] is the linear-time single-pass form over raw
//! event traces, and [`CheckSession`] lifts matching to whole threads by
//! exhaustive enumeration under context havoc.

mod check;
mod pair;

pub use check::{
    CheckConfig, CheckError, CheckOutcome, CheckSession, Counterexample, CexTrace, SessionError,
    Which,
};
pub use pair::{check_trace_pair, TracePairError};

use crate::state_traces::{LocSet, StateTrace, SyncKind, TransitionTrace};
use crate::symbols::{LocId, State, Symbols};
use std::fmt;

/// Stable labels for the matching constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Constraint {
    /// The traces have different lengths (or only one run terminated).
    Length,
    /// Lock identities (and operation kinds) differ at some index.
    SameLocks,
    /// A critical-section read outside the original's surrounding accesses.
    RaceEvenR,
    /// A critical-section write outside the original's surrounding writes.
    RaceEvenW,
    /// A between-locks read outside the original's accesses there.
    RaceOddR,
    /// A between-locks write outside the original's writes there.
    RaceOddW,
    /// States disagree at a lock on a context-visible location.
    StateLock,
    /// The transformed run lets a location change at a lock that the
    /// original accessed but the transformed run did not.
    StateLockStability,
    /// States disagree at an unlock on a location the original does not
    /// overwrite before the next lock.
    StateUnlock,
}

impl Constraint {
    pub fn label(self) -> &'static str {
        match self {
            Constraint::Length => "length",
            Constraint::SameLocks => "same-locks",
            Constraint::RaceEvenR => "race-even-R",
            Constraint::RaceEvenW => "race-even-W",
            Constraint::RaceOddR => "race-odd-R",
            Constraint::RaceOddW => "race-odd-W",
            Constraint::StateLock => "state-lock",
            Constraint::StateLockStability => "state-lock-stability",
            Constraint::StateUnlock => "state-unlock",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The offending position of a failed constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    /// Segment index (flat) or tuple index (nested).
    pub index: usize,
    pub location: Option<String>,
    /// Conflicting values as (transformed, original) where applicable.
    pub values: Option<(i64, i64)>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Match,
    /// Matching prefixes followed by a context change the original would
    /// race on; the pair counts as matched.
    PrefixDivergenceMatch,
    Mismatch,
}

/// Outcome of a matching run; mismatches carry the first violated constraint
/// in evaluation order (by index, then by the constraint order of
/// [`Constraint`]) and exactly one witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchReport {
    pub verdict: Verdict,
    pub constraint: Option<Constraint>,
    pub witness: Option<Witness>,
    /// Constraints that hold vacuously in same-init trace-pair mode and were
    /// not evaluated there.
    pub degenerate: Vec<Constraint>,
}

impl MatchReport {
    pub fn matched() -> Self {
        MatchReport {
            verdict: Verdict::Match,
            constraint: None,
            witness: None,
            degenerate: Vec::new(),
        }
    }

    pub fn diverged() -> Self {
        MatchReport {
            verdict: Verdict::PrefixDivergenceMatch,
            constraint: None,
            witness: None,
            degenerate: Vec::new(),
        }
    }

    pub fn mismatch(constraint: Constraint, witness: Witness) -> Self {
        MatchReport {
            verdict: Verdict::Mismatch,
            constraint: Some(constraint),
            witness: Some(witness),
            degenerate: Vec::new(),
        }
    }

    pub fn is_match(&self) -> bool {
        matches!(self.verdict, Verdict::Match | Verdict::PrefixDivergenceMatch)
    }
}

fn loc_name(symbols: &Symbols, loc: LocId) -> Option<String> {
    Some(symbols.loc_name(loc).to_string())
}

/// First (smallest-id) element of `set` missing from all of `windows`.
fn subset_violation(set: &LocSet, windows: &[&LocSet]) -> Option<LocId> {
    set.iter()
        .copied()
        .find(|x| !windows.iter().any(|w| w.contains(x)))
}

/// First location in `domain_except`'s complement where the states disagree:
/// checks `∀x ∉ except: a(x) = b(x)` and returns the smallest offender.
fn state_disagreement(a: &State, b: &State, except: &LocSet) -> Option<(LocId, i64, i64)> {
    (0..a.num_locs()).find_map(|i| {
        let x = LocId(i as u32);
        if except.contains(&x) {
            return None;
        }
        let (va, vb) = (a.get(x), b.get(x));
        if va != vb {
            Some((x, va, vb))
        } else {
            None
        }
    })
}

/// Decides whether the state trace `transformed` matches `original`.
///
/// Constraints are evaluated per segment in trace order: lock identity,
/// lock-state agreement, lock-state stability, the four race subset
/// constraints, then unlock-state agreement; the first violation wins.
pub fn match_state_traces(
    transformed: &StateTrace,
    original: &StateTrace,
    symbols: &Symbols,
) -> MatchReport {
    let (tp, t) = (transformed, original);
    if tp.segments.len() != t.segments.len() {
        return MatchReport::mismatch(
            Constraint::Length,
            Witness {
                index: tp.segments.len().min(t.segments.len()),
                location: None,
                values: None,
                detail: format!(
                    "transformed has {} segments, original {}",
                    tp.segments.len(),
                    t.segments.len()
                ),
            },
        );
    }
    let empty = LocSet::new();
    for (k, (sp, s)) in tp.segments.iter().zip(&t.segments).enumerate() {
        if sp.lock != s.lock {
            return MatchReport::mismatch(
                Constraint::SameLocks,
                Witness {
                    index: k,
                    location: None,
                    values: None,
                    detail: format!(
                        "lock {} vs {}",
                        symbols.lock_name(sp.lock),
                        symbols.lock_name(s.lock)
                    ),
                },
            );
        }
        // Sets of the previous odd portion (empty before the first segment).
        let (prev_a, prev_w, prev_a_tp) = match k {
            0 => (empty.clone(), &empty, empty.clone()),
            _ => (
                t.segments[k - 1].post_accesses(),
                &t.segments[k - 1].post_writes,
                tp.segments[k - 1].post_accesses(),
            ),
        };
        // States at the lock agree outside what the original accessed since
        // its previous unlock (a race-free context cannot write there).
        if let Some((x, vp, v)) = state_disagreement(&sp.lock_state, &s.lock_state, &prev_a) {
            return MatchReport::mismatch(
                Constraint::StateLock,
                Witness {
                    index: k,
                    location: loc_name(symbols, x),
                    values: Some((vp, v)),
                    detail: "states at the lock differ".to_string(),
                },
            );
        }
        // Locations the original accessed but the transformed run did not
        // must not change under the transformed run's havoc.
        if k > 0 {
            let frozen: LocSet = prev_a.difference(&prev_a_tp).copied().collect();
            let before = &tp.segments[k - 1].post_state;
            if let Some(&x) = frozen
                .iter()
                .find(|&&x| before.get(x) != sp.lock_state.get(x))
            {
                return MatchReport::mismatch(
                    Constraint::StateLockStability,
                    Witness {
                        index: k,
                        location: loc_name(symbols, x),
                        values: Some((before.get(x), sp.lock_state.get(x))),
                        detail: "context changed a location only the original accesses"
                            .to_string(),
                    },
                );
            }
        }
        let cs_a = s.cs_accesses();
        let post_a = s.post_accesses();
        let race_checks = [
            (Constraint::RaceEvenR, &sp.cs_reads, vec![&prev_a, &cs_a, &post_a]),
            (
                Constraint::RaceEvenW,
                &sp.cs_writes,
                vec![prev_w, &s.cs_writes, &s.post_writes],
            ),
            (Constraint::RaceOddR, &sp.post_reads, vec![&post_a]),
            (Constraint::RaceOddW, &sp.post_writes, vec![&s.post_writes]),
        ];
        for (constraint, set, windows) in race_checks {
            if let Some(x) = subset_violation(set, &windows) {
                return MatchReport::mismatch(
                    constraint,
                    Witness {
                        index: k,
                        location: loc_name(symbols, x),
                        values: None,
                        detail: "access outside the original's window".to_string(),
                    },
                );
            }
        }
        // States at the unlock agree outside what the original overwrites
        // before the next lock.
        if let Some((x, vp, v)) =
            state_disagreement(&sp.post_state, &s.post_state, &s.post_writes)
        {
            return MatchReport::mismatch(
                Constraint::StateUnlock,
                Witness {
                    index: k,
                    location: loc_name(symbols, x),
                    values: Some((vp, v)),
                    detail: "states at the unlock differ".to_string(),
                },
            );
        }
    }
    MatchReport::matched()
}

/// Decides whether the transition trace `transformed` matches `original`
/// (nested locks).
///
/// Lock identity and operation kind are compared for all tuples first; the
/// windowed race and state constraints are then evaluated per tuple in trace
/// order.
pub fn match_transition_traces(
    transformed: &TransitionTrace,
    original: &TransitionTrace,
    symbols: &Symbols,
) -> MatchReport {
    let (tp, t) = (transformed, original);
    if tp.tuples.len() != t.tuples.len() {
        return MatchReport::mismatch(
            Constraint::Length,
            Witness {
                index: tp.tuples.len().min(t.tuples.len()),
                location: None,
                values: None,
                detail: format!(
                    "transformed has {} tuples, original {}",
                    tp.tuples.len(),
                    t.tuples.len()
                ),
            },
        );
    }
    for (i, (up, u)) in tp.tuples.iter().zip(&t.tuples).enumerate() {
        if up.lock != u.lock || up.op != u.op {
            return MatchReport::mismatch(
                Constraint::SameLocks,
                Witness {
                    index: i,
                    location: None,
                    values: None,
                    detail: format!(
                        "{:?} {} vs {:?} {}",
                        up.op,
                        symbols.lock_name(up.lock),
                        u.op,
                        symbols.lock_name(u.lock)
                    ),
                },
            );
        }
    }
    for i in 0..t.tuples.len() {
        let up = &tp.tuples[i];
        let u = &t.tuples[i];
        let pu = t.prev_unlock(i);
        let nl = t.next_lock(i);
        let window_end = nl.map(|j| j as isize - 1).unwrap_or(t.tuples.len() as isize - 1);

        if u.op == SyncKind::Lock {
            // The window since the previous unlock (or entry).
            let pu_before = t.prev_unlock(i.saturating_sub(1)).filter(|_| i > 0);
            let t_window = t.access_window(pu_before, i as isize - 1);
            let tp_window = tp.access_window(pu_before, i as isize - 1);
            if let Some((x, vp, v)) = state_disagreement(&up.pre_state, &u.pre_state, &t_window) {
                return MatchReport::mismatch(
                    Constraint::StateLock,
                    Witness {
                        index: i,
                        location: loc_name(symbols, x),
                        values: Some((vp, v)),
                        detail: "states at the lock differ".to_string(),
                    },
                );
            }
            if i > 0 {
                let frozen: LocSet = t_window.difference(&tp_window).copied().collect();
                let before = &tp.tuples[i - 1].post_state;
                if let Some(&x) = frozen
                    .iter()
                    .find(|&&x| before.get(x) != up.pre_state.get(x))
                {
                    return MatchReport::mismatch(
                        Constraint::StateLockStability,
                        Witness {
                            index: i,
                            location: loc_name(symbols, x),
                            values: Some((before.get(x), up.pre_state.get(x))),
                            detail: "context changed a location only the original accesses"
                                .to_string(),
                        },
                    );
                }
            }
        }

        let w_window = t.write_window(pu.unwrap_or(0), window_end);
        let a_window = t.access_window(pu, window_end);
        let (r_label, w_label) = match u.op {
            SyncKind::Lock => (Constraint::RaceEvenR, Constraint::RaceEvenW),
            SyncKind::Unlock => (Constraint::RaceOddR, Constraint::RaceOddW),
        };
        if let Some(x) = subset_violation(&up.writes, &[&w_window]) {
            return MatchReport::mismatch(
                w_label,
                Witness {
                    index: i,
                    location: loc_name(symbols, x),
                    values: None,
                    detail: "write outside the original's window".to_string(),
                },
            );
        }
        if let Some(x) = subset_violation(&up.reads, &[&a_window]) {
            return MatchReport::mismatch(
                r_label,
                Witness {
                    index: i,
                    location: loc_name(symbols, x),
                    values: None,
                    detail: "read outside the original's window".to_string(),
                },
            );
        }

        if u.op == SyncKind::Unlock {
            let exempt = t.write_window(i, window_end);
            if let Some((x, vp, v)) = state_disagreement(&up.pre_state, &u.pre_state, &exempt) {
                return MatchReport::mismatch(
                    Constraint::StateUnlock,
                    Witness {
                        index: i,
                        location: loc_name(symbols, x),
                        values: Some((vp, v)),
                        detail: "states at the unlock differ".to_string(),
                    },
                );
            }
        }
    }
    MatchReport::matched()
}

#[cfg(test)]
mod tests;
