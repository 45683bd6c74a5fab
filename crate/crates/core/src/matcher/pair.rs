//! Linear-time matching of two recorded event traces.
//!
//! Both traces come from standalone runs over the same initial state, so the
//! context-havoc constraints of the general matcher hold vacuously; what
//! remains is checked in one pass:
//!
//! - states are never compared wholesale: a difference can only appear at a
//!   location somebody wrote, so the checker maintains the set of currently
//!   differing locations and consults it at unlock boundaries;
//! - subset constraints use hashed membership, and the forward-looking
//!   windows of nested mode become pending obligations discharged by the
//!   original trace's later accesses and resolved at the next lock.
//!
//! The verdict equals the segment/tuple matcher run on the built traces; the
//! property suite checks that equivalence.

use super::{Constraint, MatchReport, Witness};
use crate::symbols::{LocId, Symbols};
use crate::thread_lang::SyncMode;
use crate::trace_model::{CoherenceViolation, Event, EventTrace, TraceViolation};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transformed,
    Original,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TracePairError {
    #[error("{side:?} trace is not well formed: {violation}")]
    NotWellFormed {
        side: Side,
        violation: TraceViolation,
    },
    #[error("{side:?} trace is not read-coherent: {violation}")]
    Incoherent {
        side: Side,
        violation: CoherenceViolation,
    },
    #[error("initial states differ at {loc}: {transformed} vs {original}")]
    InitMismatch {
        loc: String,
        transformed: i64,
        original: i64,
    },
}

type LocSet = BTreeSet<LocId>;

/// Replayed state with an incrementally maintained difference set.
struct PairedState {
    original: Vec<i64>,
    transformed: Vec<i64>,
    diff: LocSet,
}

impl PairedState {
    fn new(init: Vec<i64>) -> Self {
        PairedState {
            original: init.clone(),
            transformed: init,
            diff: LocSet::new(),
        }
    }

    fn write(&mut self, side: Side, loc: LocId, value: i64) {
        let i = loc.index();
        match side {
            Side::Original => self.original[i] = value,
            Side::Transformed => self.transformed[i] = value,
        }
        if self.original[i] == self.transformed[i] {
            self.diff.remove(&loc);
        } else {
            self.diff.insert(loc);
        }
    }

    fn values(&self, loc: LocId) -> (i64, i64) {
        (self.transformed[loc.index()], self.original[loc.index()])
    }
}

struct InternedEvent {
    kind: EvKind,
}

enum EvKind {
    Lock(u32),
    Unlock(u32),
    Read(LocId),
    Write(LocId, i64),
}

fn intern_events(
    trace: &EventTrace,
    symbols: &mut Symbols,
) -> Vec<InternedEvent> {
    trace
        .events
        .iter()
        .map(|ev| InternedEvent {
            kind: match ev {
                Event::Lock(l) => EvKind::Lock(symbols.intern_lock(l).0),
                Event::Unlock(l) => EvKind::Unlock(symbols.intern_lock(l).0),
                Event::Read { loc, .. } => EvKind::Read(symbols.intern_loc(loc)),
                Event::Write { loc, value } => EvKind::Write(symbols.intern_loc(loc), *value),
            },
        })
        .collect()
}

fn validate(trace: &EventTrace, side: Side, mode: SyncMode) -> Result<(), TracePairError> {
    if let Some(violation) = trace.validate(mode).into_iter().next() {
        return Err(TracePairError::NotWellFormed { side, violation });
    }
    trace
        .check_read_coherence()
        .map_err(|violation| TracePairError::Incoherent { side, violation })
}

/// Matches two recorded traces of standalone runs in time linear in their
/// length. `mode` selects flat-lock segment matching or nested-lock
/// transition matching.
pub fn check_trace_pair(
    transformed: &EventTrace,
    original: &EventTrace,
    mode: SyncMode,
) -> Result<MatchReport, TracePairError> {
    validate(transformed, Side::Transformed, mode)?;
    validate(original, Side::Original, mode)?;

    let mut symbols = Symbols::new();
    let tp = intern_events(transformed, &mut symbols);
    let t = intern_events(original, &mut symbols);
    for loc in transformed.init.keys().chain(original.init.keys()) {
        symbols.intern_loc(loc);
    }

    // Same initial state over the joint universe (absent headers mean 0).
    let mut init = vec![0i64; symbols.num_locs()];
    for loc in symbols.locs() {
        let name = symbols.loc_name(loc);
        let (a, b) = (transformed.init_value(name), original.init_value(name));
        if a != b {
            return Err(TracePairError::InitMismatch {
                loc: name.to_string(),
                transformed: a,
                original: b,
            });
        }
        init[loc.index()] = a;
    }

    let report = match mode {
        SyncMode::NonNested => flat_pass(&tp, &t, init, &symbols),
        SyncMode::Nested => nested_pass(&tp, &t, init, &symbols),
    };
    Ok(report)
}

fn witness(
    symbols: &Symbols,
    index: usize,
    loc: Option<LocId>,
    values: Option<(i64, i64)>,
    detail: &str,
) -> Witness {
    Witness {
        index,
        location: loc.map(|l| symbols.loc_name(l).to_string()),
        values,
        detail: detail.to_string(),
    }
}

/// One lock..unlock..next-lock section scanned off an event list.
struct Section<'a> {
    lock: u32,
    cs: &'a [InternedEvent],
    post: &'a [InternedEvent],
}

fn next_section<'a>(events: &'a [InternedEvent], pos: &mut usize) -> Option<Section<'a>> {
    if *pos >= events.len() {
        return None;
    }
    let EvKind::Lock(lock) = events[*pos].kind else {
        unreachable!("validated flat traces start sections with locks");
    };
    let cs_start = *pos + 1;
    let mut i = cs_start;
    while !matches!(events[i].kind, EvKind::Unlock(_)) {
        i += 1;
    }
    let post_start = i + 1;
    let mut j = post_start;
    while j < events.len() && !matches!(events[j].kind, EvKind::Lock(_)) {
        j += 1;
    }
    let section = Section {
        lock,
        cs: &events[cs_start..i],
        post: &events[post_start..j],
    };
    *pos = j;
    Some(section)
}

#[derive(Default)]
struct PortionSets {
    reads: LocSet,
    writes: LocSet,
}

impl PortionSets {
    fn accesses_contain(&self, x: LocId) -> bool {
        self.reads.contains(&x) || self.writes.contains(&x)
    }
}

fn replay(events: &[InternedEvent], side: Side, state: &mut PairedState) -> PortionSets {
    let mut sets = PortionSets::default();
    for ev in events {
        match ev.kind {
            EvKind::Read(loc) => {
                sets.reads.insert(loc);
            }
            EvKind::Write(loc, value) => {
                sets.writes.insert(loc);
                state.write(side, loc, value);
            }
            _ => unreachable!("sections contain only memory events"),
        }
    }
    sets
}

fn flat_pass(
    tp: &[InternedEvent],
    t: &[InternedEvent],
    init: Vec<i64>,
    symbols: &Symbols,
) -> MatchReport {
    let degenerate = vec![Constraint::StateLock, Constraint::StateLockStability];
    let mut state = PairedState::new(init);
    let (mut tp_pos, mut t_pos) = (0, 0);
    let mut prev: Option<(PortionSets, PortionSets)> = None; // t's (cs, post) of k-1
    let mut k = 0;
    loop {
        let (tp_sec, t_sec) = match (
            next_section(tp, &mut tp_pos),
            next_section(t, &mut t_pos),
        ) {
            (None, None) => {
                let mut report = MatchReport::matched();
                report.degenerate = degenerate;
                return report;
            }
            (Some(a), Some(b)) => (a, b),
            _ => {
                let mut report = MatchReport::mismatch(
                    Constraint::Length,
                    witness(symbols, k, None, None, "section counts differ"),
                );
                report.degenerate = degenerate;
                return report;
            }
        };
        let fail = |constraint: Constraint, w: Witness| {
            let mut report = MatchReport::mismatch(constraint, w);
            report.degenerate = degenerate.clone();
            report
        };
        if tp_sec.lock != t_sec.lock {
            return fail(
                Constraint::SameLocks,
                witness(symbols, k, None, None, "lock identities differ"),
            );
        }
        let t_cs = replay(t_sec.cs, Side::Original, &mut state);
        let tp_cs = replay(tp_sec.cs, Side::Transformed, &mut state);
        let t_post = replay(t_sec.post, Side::Original, &mut state);
        let tp_post = replay(tp_sec.post, Side::Transformed, &mut state);

        // Race constraints against the original's adjacent portions.
        let in_even_r = |x: LocId| {
            t_cs.accesses_contain(x)
                || t_post.accesses_contain(x)
                || prev.as_ref().is_some_and(|(_, p)| p.accesses_contain(x))
        };
        if let Some(&x) = tp_cs.reads.iter().find(|&&x| !in_even_r(x)) {
            return fail(
                Constraint::RaceEvenR,
                witness(symbols, k, Some(x), None, "read outside the original's window"),
            );
        }
        let in_even_w = |x: LocId| {
            t_cs.writes.contains(&x)
                || t_post.writes.contains(&x)
                || prev.as_ref().is_some_and(|(_, p)| p.writes.contains(&x))
        };
        if let Some(&x) = tp_cs.writes.iter().find(|&&x| !in_even_w(x)) {
            return fail(
                Constraint::RaceEvenW,
                witness(symbols, k, Some(x), None, "write outside the original's window"),
            );
        }
        if let Some(&x) = tp_post.reads.iter().find(|&&x| !t_post.accesses_contain(x)) {
            return fail(
                Constraint::RaceOddR,
                witness(symbols, k, Some(x), None, "read outside the original's window"),
            );
        }
        if let Some(&x) = tp_post.writes.iter().find(|&&x| !t_post.writes.contains(&x)) {
            return fail(
                Constraint::RaceOddW,
                witness(symbols, k, Some(x), None, "write outside the original's window"),
            );
        }
        // States before the next lock agree wherever the original did not
        // write since its unlock; only written locations can differ, so the
        // difference set is all that needs scanning.
        if let Some(&x) = state.diff.iter().find(|x| !t_post.writes.contains(x)) {
            let (vp, v) = state.values(x);
            return fail(
                Constraint::StateUnlock,
                witness(symbols, k, Some(x), Some((vp, v)), "states at the unlock differ"),
            );
        }
        prev = Some((t_cs, t_post));
        k += 1;
    }
}

/// Pending forward-window obligation of nested mode.
#[derive(Debug, Clone, Copy)]
struct Pending {
    origin: usize,
    values: Option<(i64, i64)>,
}

/// A finalized violation: constraint, origin tuple, location and values.
type Finalized = (Constraint, usize, LocId, Option<(i64, i64)>);

fn nested_pass(
    tp: &[InternedEvent],
    t: &[InternedEvent],
    init: Vec<i64>,
    symbols: &Symbols,
) -> MatchReport {
    let degenerate = vec![Constraint::StateLock, Constraint::StateLockStability];
    let finish = |report: MatchReport| {
        let mut report = report;
        report.degenerate = degenerate.clone();
        report
    };

    let mut state = PairedState::new(init);
    let num_locs = symbols.num_locs();
    // Original-trace recency, by tuple index.
    let mut last_access: Vec<Option<usize>> = vec![None; num_locs];
    let mut last_write: Vec<Option<usize>> = vec![None; num_locs];
    let mut last_unlock: Option<usize> = None;
    // Obligations awaiting a justifying access of the original before the
    // next lock: reads (any access), writes and unlock-state (writes only).
    let mut pending_r: BTreeMap<LocId, Pending> = BTreeMap::new();
    let mut pending_w: BTreeMap<LocId, Pending> = BTreeMap::new();
    let mut pending_s: BTreeMap<LocId, Pending> = BTreeMap::new();

    let finalize = |pending_r: &BTreeMap<LocId, Pending>,
                    pending_w: &BTreeMap<LocId, Pending>,
                    pending_s: &BTreeMap<LocId, Pending>,
                    tuple_op: &dyn Fn(usize) -> bool|
     -> Option<Finalized> {
        // Report the oldest obligation; ties follow the per-tuple evaluation
        // order (writes, reads, unlock states) and then location order.
        let mut best: Option<(usize, u8, LocId, Option<(i64, i64)>)> = None;
        let ranked = [(pending_w, 0u8), (pending_r, 1u8), (pending_s, 2u8)];
        for (map, rank) in ranked {
            for (&loc, p) in map.iter() {
                let key = (p.origin, rank, loc, p.values);
                if best.is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                    best = Some(key);
                }
            }
        }
        best.map(|(origin, rank, loc, values)| {
            let constraint = match rank {
                0 => {
                    if tuple_op(origin) {
                        Constraint::RaceEvenW
                    } else {
                        Constraint::RaceOddW
                    }
                }
                1 => {
                    if tuple_op(origin) {
                        Constraint::RaceEvenR
                    } else {
                        Constraint::RaceOddR
                    }
                }
                _ => Constraint::StateUnlock,
            };
            (constraint, origin, loc, values)
        })
    };

    // Tuple boundaries: sync events split both traces into aligned portions.
    let mut tp_pos = 0;
    let mut t_pos = 0;
    let mut i = 0; // tuple index
    let mut is_lock_tuple: Vec<bool> = Vec::new();
    loop {
        let tp_sync = tp.get(tp_pos).map(|e| &e.kind);
        let t_sync = t.get(t_pos).map(|e| &e.kind);
        let (tp_op, t_op) = match (tp_sync, t_sync) {
            (None, None) => {
                // Windows still open extend to the end of the trace.
                if let Some((c, origin, loc, values)) = finalize(
                    &pending_r,
                    &pending_w,
                    &pending_s,
                    &|o| is_lock_tuple[o],
                ) {
                    return finish(MatchReport::mismatch(
                        c,
                        witness(symbols, origin, Some(loc), values, "window closed at trace end"),
                    ));
                }
                return finish(MatchReport::matched());
            }
            (Some(a), Some(b)) => (a, b),
            _ => {
                return finish(MatchReport::mismatch(
                    Constraint::Length,
                    witness(symbols, i, None, None, "tuple counts differ"),
                ));
            }
        };
        let (tp_is_lock, tp_lock) = match *tp_op {
            EvKind::Lock(l) => (true, l),
            EvKind::Unlock(l) => (false, l),
            _ => unreachable!("tuple boundaries are sync events"),
        };
        let (t_is_lock, t_lock) = match *t_op {
            EvKind::Lock(l) => (true, l),
            EvKind::Unlock(l) => (false, l),
            _ => unreachable!("tuple boundaries are sync events"),
        };
        if tp_is_lock != t_is_lock || tp_lock != t_lock {
            return finish(MatchReport::mismatch(
                Constraint::SameLocks,
                witness(symbols, i, None, None, "sync operations differ"),
            ));
        }
        is_lock_tuple.push(t_is_lock);

        if t_is_lock {
            // Every open window ends just before a lock tuple.
            if let Some((c, origin, loc, values)) =
                finalize(&pending_r, &pending_w, &pending_s, &|o| is_lock_tuple[o])
            {
                return finish(MatchReport::mismatch(
                    c,
                    witness(symbols, origin, Some(loc), values, "window closed at a lock"),
                ));
            }
        } else {
            // Unlock-state constraint: currently differing locations must be
            // overwritten by the original before the next lock.
            for &x in state.diff.iter() {
                let (vp, v) = state.values(x);
                pending_s.entry(x).or_insert(Pending {
                    origin: i,
                    values: Some((vp, v)),
                });
            }
            last_unlock = Some(i);
        }

        // Replay the original's portion, discharging obligations.
        tp_pos += 1;
        t_pos += 1;
        let t_portion_start = t_pos;
        while t_pos < t.len() {
            match t[t_pos].kind {
                EvKind::Lock(_) | EvKind::Unlock(_) => break,
                EvKind::Read(loc) => {
                    last_access[loc.index()] = Some(i);
                    pending_r.remove(&loc);
                }
                EvKind::Write(loc, value) => {
                    last_access[loc.index()] = Some(i);
                    last_write[loc.index()] = Some(i);
                    state.write(Side::Original, loc, value);
                    pending_r.remove(&loc);
                    pending_w.remove(&loc);
                    pending_s.remove(&loc);
                }
            }
            t_pos += 1;
        }
        let _ = t_portion_start;

        // Replay the transformed portion and raise its race obligations.
        let window_start = if t_is_lock { last_unlock } else { Some(i) };
        let justified = |slot: &[Option<usize>], x: LocId| match (slot[x.index()], window_start) {
            (Some(at), Some(start)) => at >= start,
            (Some(_), None) => true, // window reaches back to the entry
            (None, _) => false,
        };
        while tp_pos < tp.len() {
            match tp[tp_pos].kind {
                EvKind::Lock(_) | EvKind::Unlock(_) => break,
                EvKind::Read(loc) => {
                    if !justified(&last_access, loc) {
                        pending_r.entry(loc).or_insert(Pending {
                            origin: i,
                            values: None,
                        });
                    }
                }
                EvKind::Write(loc, value) => {
                    state.write(Side::Transformed, loc, value);
                    if !justified(&last_write, loc) {
                        pending_w.entry(loc).or_insert(Pending {
                            origin: i,
                            values: None,
                        });
                    }
                }
            }
            tp_pos += 1;
        }
        i += 1;
    }
}
