//! Event-transformation baseline matcher.
//!
//! This is the style of checker the state matcher is measured against: it
//! decides whether the transformed trace can be produced from the original by
//! a sequence of syntactic trace transformations (adjacent non-conflicting
//! reordering, overwritten-write elimination, irrelevant-read elimination and
//! introduction). Transformations never cross a synchronization event, so the
//! search decomposes into one subproblem per portion between sync events and
//! its cost falls as the lock count grows. It exists for small-instance truth
//! and timing contrast, not production use.
//!
//! The applicability conditions are pinned here:
//! - reorder: adjacent memory events on different locations, or two reads;
//! - eliminate a write: a later write to the same location follows with no
//!   intervening access to it and no intervening sync event;
//! - eliminate a read: always allowed (it only shrinks what the trace
//!   observes);
//! - introduce a read: the location must already be accessed in the same
//!   portion, or (inside a critical section) in the adjacent portions; the
//!   read takes the value the trace replays to at that point.

use crate::thread_lang::SyncMode;
use crate::trace_model::{Event, EventTrace};
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;
use thiserror::Error;

pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Portions larger than this route to greedy (non-exhaustive) search, which
/// reports budget exhaustion instead of claiming not-found.
const EXHAUSTIVE_PORTION_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Transformation {
    /// Swap the adjacent non-conflicting memory events at `pos`, `pos + 1`.
    ReorderAdjacent { pos: usize },
    /// Remove the write at `pos`, overwritten with no intervening access.
    EliminateOverwrittenWrite { pos: usize },
    /// Remove the read at `pos`.
    EliminateIrrelevantRead { pos: usize },
    /// Insert a read of `loc` before position `pos`; its value replays.
    IntroduceIrrelevantRead { pos: usize, loc: String },
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transformation::ReorderAdjacent { pos } => write!(f, "reorder@{pos}"),
            Transformation::EliminateOverwrittenWrite { pos } => {
                write!(f, "eliminate-overwritten-write@{pos}")
            }
            Transformation::EliminateIrrelevantRead { pos } => {
                write!(f, "eliminate-irrelevant-read@{pos}")
            }
            Transformation::IntroduceIrrelevantRead { pos, loc } => {
                write!(f, "introduce-irrelevant-read@{pos}:{loc}")
            }
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("transformation is not applicable at its position: {0}")]
    NotApplicable(String),
}

/// Replayed value of `loc` just before event index `pos`.
fn value_before(trace: &EventTrace, pos: usize, loc: &str) -> i64 {
    trace.events[..pos]
        .iter()
        .rev()
        .find_map(|ev| match ev {
            Event::Write { loc: l, value } if l == loc => Some(*value),
            _ => None,
        })
        .unwrap_or_else(|| trace.init_value(loc))
}

/// Portion index of an insertion point in a flat trace: the number of sync
/// events at indices `< pos`. Odd means inside a critical section.
fn portion_of(trace: &EventTrace, pos: usize) -> usize {
    trace.events[..pos].iter().filter(|e| e.is_sync()).count()
}

/// Accesses of the flat-trace portion holding insertion point `pos`, plus
/// (inside a critical section) the adjacent portions' accesses.
fn intro_window(trace: &EventTrace, pos: usize) -> HashSet<&str> {
    let portion = portion_of(trace, pos);
    let mut window = HashSet::new();
    let mut current = 0;
    for ev in &trace.events {
        if ev.is_sync() {
            current += 1;
            continue;
        }
        let in_window = current == portion
            || (portion % 2 == 1 && (current + 1 == portion || current == portion + 1));
        if in_window {
            if let Some(loc) = ev.mem_loc() {
                window.insert(loc);
            }
        }
    }
    window
}

impl Transformation {
    /// Applies the transformation, or explains why it does not apply.
    pub fn apply(&self, trace: &EventTrace) -> Result<EventTrace, ApplyError> {
        let mut out = trace.clone();
        match self {
            Transformation::ReorderAdjacent { pos } => {
                let (Some(a), Some(b)) = (trace.events.get(*pos), trace.events.get(pos + 1))
                else {
                    return Err(ApplyError::NotApplicable("position out of range".into()));
                };
                if !a.is_mem() || !b.is_mem() {
                    return Err(ApplyError::NotApplicable(
                        "reordering never crosses a sync event".into(),
                    ));
                }
                if a.conflicts_with(b) {
                    return Err(ApplyError::NotApplicable("events conflict".into()));
                }
                out.events.swap(*pos, pos + 1);
            }
            Transformation::EliminateOverwrittenWrite { pos } => {
                let Some(Event::Write { loc, .. }) = trace.events.get(*pos) else {
                    return Err(ApplyError::NotApplicable("not a write".into()));
                };
                let mut overwritten = false;
                for ev in &trace.events[pos + 1..] {
                    if ev.is_sync() {
                        break;
                    }
                    match ev {
                        Event::Write { loc: l, .. } if l == loc => {
                            overwritten = true;
                            break;
                        }
                        _ if ev.mem_loc() == Some(loc) => break,
                        _ => {}
                    }
                }
                if !overwritten {
                    return Err(ApplyError::NotApplicable(
                        "no overwriting write before the next access or sync".into(),
                    ));
                }
                out.events.remove(*pos);
            }
            Transformation::EliminateIrrelevantRead { pos } => {
                if !matches!(trace.events.get(*pos), Some(Event::Read { .. })) {
                    return Err(ApplyError::NotApplicable("not a read".into()));
                }
                out.events.remove(*pos);
            }
            Transformation::IntroduceIrrelevantRead { pos, loc } => {
                if *pos > trace.events.len() {
                    return Err(ApplyError::NotApplicable("position out of range".into()));
                }
                if portion_of(trace, *pos) == 0 {
                    return Err(ApplyError::NotApplicable(
                        "no introduction before the first lock".into(),
                    ));
                }
                if !intro_window(trace, *pos).contains(loc.as_str()) {
                    return Err(ApplyError::NotApplicable(
                        "location not accessed in the surrounding portions".into(),
                    ));
                }
                let value = value_before(trace, *pos, loc);
                out.events.insert(
                    *pos,
                    Event::Read {
                        loc: loc.clone(),
                        value,
                    },
                );
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Found(Vec<Transformation>),
    NotFound,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub outcome: OracleOutcome,
    /// Search nodes expanded.
    pub visited: usize,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("trace pair is not comparable: {0}")]
    InvalidInput(String),
}

/// Local transformation within one portion's event list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Local {
    Reorder(usize),
    ElimWrite(usize),
    ElimRead(usize),
    Intro(usize, String),
}

struct Portion<'a> {
    original: Vec<Event>,
    target: Vec<Event>,
    /// Locations an introduced read may use besides the portion's own.
    fixed_window: HashSet<&'a str>,
    /// State at the portion start, for introduced read values.
    entry_state: HashMap<&'a str, i64>,
}

fn mem_conflicts(a: &Event, b: &Event) -> bool {
    a.conflicts_with(b)
}

/// Successor states of one portion configuration.
fn expand(portion: &Portion<'_>, events: &[Event]) -> Vec<(Local, Vec<Event>)> {
    let mut out = Vec::new();
    // Reorders.
    for pos in 0..events.len().saturating_sub(1) {
        if !mem_conflicts(&events[pos], &events[pos + 1]) {
            let mut next = events.to_vec();
            next.swap(pos, pos + 1);
            out.push((Local::Reorder(pos), next));
        }
    }
    // Eliminations.
    for (pos, ev) in events.iter().enumerate() {
        match ev {
            Event::Read { .. } => {
                let mut next = events.to_vec();
                next.remove(pos);
                out.push((Local::ElimRead(pos), next));
            }
            Event::Write { loc, .. } => {
                let overwritten = events[pos + 1..].iter().find_map(|e| match e {
                    Event::Write { loc: l, .. } if l == loc => Some(true),
                    e if e.mem_loc() == Some(loc) => Some(false),
                    _ => None,
                });
                if overwritten == Some(true) {
                    let mut next = events.to_vec();
                    next.remove(pos);
                    out.push((Local::ElimWrite(pos), next));
                }
            }
            _ => unreachable!("portions are memory events"),
        }
    }
    // Introductions: locations from the portion's window, value replayed.
    let mut allowed: HashSet<&str> = portion.fixed_window.clone();
    for ev in events {
        if let Some(loc) = ev.mem_loc() {
            allowed.insert(loc);
        }
    }
    for pos in 0..=events.len() {
        for &loc in &allowed {
            let mut value = portion.entry_state.get(loc).copied().unwrap_or(0);
            for ev in &events[..pos] {
                if let Event::Write { loc: l, value: v } = ev {
                    if l == loc {
                        value = *v;
                    }
                }
            }
            let mut next = events.to_vec();
            next.insert(
                pos,
                Event::Read {
                    loc: loc.to_string(),
                    value,
                },
            );
            out.push((Local::Intro(pos, loc.to_string()), next));
        }
    }
    out
}

/// Writes (location, value, multiplicity) of a portion; eliminations only
/// remove writes, so a search state whose writes no longer cover the target's
/// is dead.
fn write_multiset(events: &[Event]) -> HashMap<(&str, i64), usize> {
    let mut m = HashMap::new();
    for ev in events {
        if let Event::Write { loc, value } = ev {
            *m.entry((loc.as_str(), *value)).or_insert(0) += 1;
        }
    }
    m
}

fn covers(cur: &HashMap<(&str, i64), usize>, target: &HashMap<(&str, i64), usize>) -> bool {
    target.iter().all(|(k, n)| cur.get(k).unwrap_or(&0) >= n)
}

enum PortionOutcome {
    Found(Vec<Local>),
    NotFound,
    BudgetExhausted,
}

fn solve_portion(
    portion: &Portion<'_>,
    budget: &mut usize,
    visited_total: &mut usize,
) -> PortionOutcome {
    if portion.original == portion.target {
        return PortionOutcome::Found(Vec::new());
    }
    let target_writes = write_multiset(&portion.target);
    let max_len = portion.original.len().max(portion.target.len());
    let exhaustive = portion.original.len() <= EXHAUSTIVE_PORTION_LIMIT
        && portion.target.len() <= EXHAUSTIVE_PORTION_LIMIT;

    // Greedy score: positions that disagree with the target.
    let score = |events: &[Event]| -> usize {
        let agree = events
            .iter()
            .zip(&portion.target)
            .filter(|(a, b)| a == b)
            .count();
        max_len + portion.target.len() - 2 * agree
    };

    let mut visited: HashSet<Vec<Event>> = HashSet::new();
    visited.insert(portion.original.clone());
    let mut queue: VecDeque<(Vec<Event>, Vec<Local>)> = VecDeque::new();
    let mut heap: BinaryHeap<(std::cmp::Reverse<usize>, usize)> = BinaryHeap::new();
    let mut nodes: Vec<(Vec<Event>, Vec<Local>)> = Vec::new();
    if exhaustive {
        queue.push_back((portion.original.clone(), Vec::new()));
    } else {
        nodes.push((portion.original.clone(), Vec::new()));
        heap.push((std::cmp::Reverse(score(&portion.original)), 0));
    }

    loop {
        let (events, path) = if exhaustive {
            match queue.pop_front() {
                Some(n) => n,
                None => return PortionOutcome::NotFound,
            }
        } else {
            match heap.pop() {
                Some((_, idx)) => nodes[idx].clone(),
                None => return PortionOutcome::BudgetExhausted,
            }
        };
        if *budget == 0 || visited.len() > 300_000 {
            return PortionOutcome::BudgetExhausted;
        }
        *budget -= 1;
        *visited_total += 1;

        for (local, next) in expand(portion, &events) {
            if next.len() > max_len {
                continue;
            }
            if !covers(&write_multiset(&next), &target_writes) {
                continue;
            }
            if !visited.insert(next.clone()) {
                continue;
            }
            let mut next_path = path.clone();
            next_path.push(local);
            if next == portion.target {
                return PortionOutcome::Found(next_path);
            }
            if exhaustive {
                queue.push_back((next, next_path));
            } else {
                heap.push((std::cmp::Reverse(score(&next)), nodes.len()));
                nodes.push((next, next_path));
            }
        }
    }
}

/// Splits a flat trace into its sync skeleton and memory portions.
fn split(trace: &EventTrace) -> (Vec<&Event>, Vec<Vec<Event>>) {
    let mut syncs = Vec::new();
    let mut portions = vec![Vec::new()];
    for ev in &trace.events {
        if ev.is_sync() {
            syncs.push(ev);
            portions.push(Vec::new());
        } else {
            portions.last_mut().unwrap().push(ev.clone());
        }
    }
    (syncs, portions)
}

/// Searches for a transformation sequence turning `original` into
/// `transformed`. Both traces must be valid flat-lock traces over the same
/// initial state.
pub fn oracle_match(
    transformed: &EventTrace,
    original: &EventTrace,
    budget: usize,
) -> Result<OracleReport, OracleError> {
    for (name, t) in [("transformed", transformed), ("original", original)] {
        if let Some(v) = t.validate(SyncMode::NonNested).into_iter().next() {
            return Err(OracleError::InvalidInput(format!("{name} trace: {v}")));
        }
        if let Err(v) = t.check_read_coherence() {
            return Err(OracleError::InvalidInput(format!("{name} trace: {v}")));
        }
    }
    let mut locs: Vec<&String> = transformed.init.keys().chain(original.init.keys()).collect();
    locs.sort();
    locs.dedup();
    for loc in locs {
        if transformed.init_value(loc) != original.init_value(loc) {
            return Err(OracleError::InvalidInput(format!(
                "initial states differ at {loc}"
            )));
        }
    }

    let (t_syncs, t_portions) = split(original);
    let (tp_syncs, tp_portions) = split(transformed);
    if t_syncs != tp_syncs {
        // No transformation touches sync events.
        return Ok(OracleReport {
            outcome: OracleOutcome::NotFound,
            visited: 0,
        });
    }

    // Portion entry states and windows come from the original trace; every
    // transformation preserves portion boundary states.
    let mut entry_states: Vec<HashMap<&str, i64>> = Vec::new();
    let mut state: HashMap<&str, i64> = original
        .init
        .iter()
        .map(|(k, v)| (k.as_str(), *v))
        .collect();
    let mut accesses: Vec<HashSet<&str>> = vec![HashSet::new(); t_portions.len()];
    {
        let mut p = 0;
        entry_states.push(state.clone());
        for ev in &original.events {
            if ev.is_sync() {
                p += 1;
                entry_states.push(state.clone());
                continue;
            }
            if let Some(loc) = ev.mem_loc() {
                accesses[p].insert(loc);
            }
            if let Event::Write { loc, value } = ev {
                state.insert(loc, *value);
            }
        }
    }

    let mut transformations = Vec::new();
    let mut budget_left = budget;
    let mut visited = 0;
    let mut offset = 0; // global index of the portion start in the final trace
    for (p, (orig_portion, target)) in t_portions.iter().zip(&tp_portions).enumerate() {
        // Inside a critical section the window extends to the neighbors:
        // final content to the left, original content to the right.
        let mut fixed_window = HashSet::new();
        if p % 2 == 1 {
            if p >= 1 {
                for ev in &tp_portions[p - 1] {
                    if let Some(loc) = ev.mem_loc() {
                        fixed_window.insert(loc);
                    }
                }
            }
            if p + 1 < accesses.len() {
                fixed_window.extend(accesses[p + 1].iter().copied());
            }
        }
        let portion = Portion {
            original: orig_portion.clone(),
            target: target.clone(),
            fixed_window,
            entry_state: entry_states[p].clone(),
        };
        match solve_portion(&portion, &mut budget_left, &mut visited) {
            PortionOutcome::Found(locals) => {
                for local in locals {
                    transformations.push(match local {
                        Local::Reorder(i) => Transformation::ReorderAdjacent { pos: offset + i },
                        Local::ElimWrite(i) => {
                            Transformation::EliminateOverwrittenWrite { pos: offset + i }
                        }
                        Local::ElimRead(i) => {
                            Transformation::EliminateIrrelevantRead { pos: offset + i }
                        }
                        Local::Intro(i, loc) => {
                            Transformation::IntroduceIrrelevantRead { pos: offset + i, loc }
                        }
                    });
                }
            }
            PortionOutcome::NotFound => {
                return Ok(OracleReport {
                    outcome: OracleOutcome::NotFound,
                    visited,
                })
            }
            PortionOutcome::BudgetExhausted => {
                return Ok(OracleReport {
                    outcome: OracleOutcome::BudgetExhausted,
                    visited,
                })
            }
        }
        offset += target.len() + 1; // the portion's final length plus its sync
    }

    if cfg!(debug_assertions) {
        let mut replay = original.clone();
        for t in &transformations {
            replay = t.apply(&replay).expect("composed sequence applies");
        }
        debug_assert_eq!(&replay, transformed, "sequence reproduces the target");
    }
    Ok(OracleReport {
        outcome: OracleOutcome::Found(transformations),
        visited,
    })
}
