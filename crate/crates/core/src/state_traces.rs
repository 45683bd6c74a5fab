//! Coarse per-thread abstractions: state traces (flat locks) and transition
//! traces (nested locks).
//!
//! A state trace splits a run into lock-to-lock segments. Each segment
//! records the state observed at the lock, the read/write sets inside the
//! critical section, the state at the unlock, and the read/write sets and
//! state of the portion up to the next lock. A transition trace generalizes
//! to nested locks with one tuple per synchronization operation.
//!
//! Enumeration runs the thread deterministically between synchronization
//! points while modeling a race-free context: at each lock acquisition every
//! location the thread has not touched since its previous unlock may take any
//! value from a finite domain ("context havoc"); locations it did touch must
//! keep their value, since a context write to them would race.

use crate::exec::{run_portion, take_sync, CompiledThread, Cursor, PortionEnd};
use crate::symbols::{LocId, LockId, State, Symbols};
use crate::thread_lang::SyncMode;
use crate::trace_model::{CoherenceViolation, Event, EventTrace, TraceViolation};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

pub type LocSet = BTreeSet<LocId>;

/// One lock-to-lock segment of a state trace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentPair {
    pub lock: LockId,
    /// State at the lock acquisition (after any context havoc).
    pub lock_state: State,
    /// Reads/writes between the lock and its unlock.
    pub cs_reads: LocSet,
    pub cs_writes: LocSet,
    /// State at the unlock.
    pub unlock_state: State,
    /// Reads/writes between the unlock and the next lock (or thread exit).
    pub post_reads: LocSet,
    pub post_writes: LocSet,
    /// State immediately before the next lock (or at thread exit).
    pub post_state: State,
}

impl SegmentPair {
    /// Accessed locations inside the critical section.
    pub fn cs_accesses(&self) -> LocSet {
        self.cs_reads.union(&self.cs_writes).copied().collect()
    }

    /// Accessed locations between the unlock and the next lock.
    pub fn post_accesses(&self) -> LocSet {
        self.post_reads.union(&self.post_writes).copied().collect()
    }

    /// The unlock-side state as far as a matcher may rely on it: the value of
    /// every location not written after the unlock, `None` on the rest.
    pub fn unlock_exit_view(&self) -> Vec<Option<i64>> {
        (0..self.post_state.num_locs())
            .map(|i| {
                let loc = LocId(i as u32);
                if self.post_writes.contains(&loc) {
                    None
                } else {
                    Some(self.post_state.get(loc))
                }
            })
            .collect()
    }
}

/// State trace of a thread run; `terminated` distinguishes a completed run
/// from a prefix that stops at a lock boundary.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateTrace {
    pub segments: Vec<SegmentPair>,
    pub terminated: bool,
}

impl StateTrace {
    /// Diagnostic text form, one segment per line.
    pub fn render(&self, symbols: &Symbols) -> String {
        let mut out = String::new();
        for (k, seg) in self.segments.iter().enumerate() {
            writeln!(
                out,
                "seg {k}: lock {} at {} | cs R{} W{} -> {} | post R{} W{} -> {}",
                symbols.lock_name(seg.lock),
                seg.lock_state.display(symbols),
                render_set(&seg.cs_reads, symbols),
                render_set(&seg.cs_writes, symbols),
                seg.unlock_state.display(symbols),
                render_set(&seg.post_reads, symbols),
                render_set(&seg.post_writes, symbols),
                seg.post_state.display(symbols),
            )
            .unwrap();
        }
        if !self.terminated {
            out.push_str("(prefix; thread continues at a lock)\n");
        }
        out
    }
}

fn render_set(set: &LocSet, symbols: &Symbols) -> String {
    let v: Vec<&str> = set.iter().map(|&l| symbols.loc_name(l)).collect();
    format!("{{{}}}", v.join(","))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SyncKind {
    Lock,
    Unlock,
}

/// One tuple of a transition trace: a synchronization operation plus the
/// memory accesses up to the next one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionTuple {
    pub lock: LockId,
    pub op: SyncKind,
    /// State at the synchronization operation (after any context havoc).
    pub pre_state: State,
    pub reads: LocSet,
    pub writes: LocSet,
    /// State immediately before the next synchronization operation.
    pub post_state: State,
}

impl TransitionTuple {
    pub fn accesses(&self) -> LocSet {
        self.reads.union(&self.writes).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionTrace {
    pub tuples: Vec<TransitionTuple>,
    pub terminated: bool,
}

impl TransitionTrace {
    /// Smallest `j > i` holding a lock tuple with only unlock tuples strictly
    /// between; `None` when the trace ends first (windows then extend to the
    /// end of the trace).
    pub fn next_lock(&self, i: usize) -> Option<usize> {
        for (j, tuple) in self.tuples.iter().enumerate().skip(i + 1) {
            match tuple.op {
                SyncKind::Lock => return Some(j),
                SyncKind::Unlock => continue,
            }
        }
        None
    }

    /// Largest `j <= i` holding an unlock tuple with only lock tuples strictly
    /// between `j` and `i`; `None` stands for the thread entry, treated as a
    /// virtual unlock with empty access sets.
    pub fn prev_unlock(&self, i: usize) -> Option<usize> {
        if self.tuples.is_empty() {
            return None;
        }
        for j in (0..=i.min(self.tuples.len() - 1)).rev() {
            match self.tuples[j].op {
                SyncKind::Unlock => return Some(j),
                SyncKind::Lock => continue,
            }
        }
        None
    }

    /// Union of access sets over tuples `from..=to` (`from = None` starts at
    /// the virtual entry unlock, i.e. index 0; an empty range is empty).
    pub fn access_window(&self, from: Option<usize>, to_inclusive: isize) -> LocSet {
        let mut set = LocSet::new();
        let start = from.unwrap_or(0);
        for k in start..self.tuples.len().min((to_inclusive.max(-1) + 1) as usize) {
            set.extend(self.tuples[k].accesses());
        }
        set
    }

    /// Union of write sets over tuples `from..=to`.
    pub fn write_window(&self, from: usize, to_inclusive: isize) -> LocSet {
        let mut set = LocSet::new();
        for k in from..self.tuples.len().min((to_inclusive.max(-1) + 1) as usize) {
            set.extend(self.tuples[k].writes.iter().copied());
        }
        set
    }

    /// Diagnostic text form, one tuple per line.
    pub fn render(&self, symbols: &Symbols) -> String {
        let mut out = String::new();
        for (i, t) in self.tuples.iter().enumerate() {
            let op = match t.op {
                SyncKind::Lock => "lock",
                SyncKind::Unlock => "unlock",
            };
            writeln!(
                out,
                "tuple {i}: {op} {} at {} | R{} W{} -> {}",
                symbols.lock_name(t.lock),
                t.pre_state.display(symbols),
                render_set(&t.reads, symbols),
                render_set(&t.writes, symbols),
                t.post_state.display(symbols),
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("trace is not well formed: {0}")]
    NotWellFormed(TraceViolation),
    #[error("trace is not read-coherent: {0}")]
    Incoherent(CoherenceViolation),
}

/// Interns every location and lock a trace mentions. Call this for all traces
/// of a comparison before building any of them, so the states share one
/// memory universe.
pub fn intern_trace(trace: &EventTrace, symbols: &mut Symbols) {
    for loc in trace.init.keys() {
        symbols.intern_loc(loc);
    }
    for ev in &trace.events {
        match ev {
            Event::Lock(l) | Event::Unlock(l) => {
                symbols.intern_lock(l);
            }
            Event::Read { loc, .. } | Event::Write { loc, .. } => {
                symbols.intern_loc(loc);
            }
        }
    }
}

fn initial_state(trace: &EventTrace, symbols: &Symbols) -> State {
    let mut state = State::zeroed(symbols.num_locs());
    for (loc, value) in &trace.init {
        state.set(symbols.loc(loc).expect("trace names are interned"), *value);
    }
    state
}

fn validated(trace: &EventTrace, mode: SyncMode) -> Result<(), BuildError> {
    if let Some(v) = trace.validate(mode).into_iter().next() {
        return Err(BuildError::NotWellFormed(v));
    }
    trace.check_read_coherence().map_err(BuildError::Incoherent)
}

/// Builds the state trace of a flat-lock event trace in one pass, replaying
/// writes from the initial state. The trace's names must already be interned.
pub fn build_state_trace(trace: &EventTrace, symbols: &Symbols) -> Result<StateTrace, BuildError> {
    validated(trace, SyncMode::NonNested)?;
    let mut state = initial_state(trace, symbols);
    let mut segments = Vec::new();
    let mut events = trace.events.iter().peekable();

    while let Some(ev) = events.next() {
        let Event::Lock(l) = ev else {
            unreachable!("validation: sections start with locks");
        };
        let lock = symbols.lock(l).expect("trace names are interned");
        let lock_state = state.clone();
        let mut cs_reads = LocSet::new();
        let mut cs_writes = LocSet::new();
        loop {
            match events.next() {
                Some(Event::Unlock(_)) => break,
                Some(Event::Read { loc, .. }) => {
                    cs_reads.insert(symbols.loc(loc).unwrap());
                }
                Some(Event::Write { loc, value }) => {
                    let id = symbols.loc(loc).unwrap();
                    state.set(id, *value);
                    cs_writes.insert(id);
                }
                _ => unreachable!("validation: sections close before the trace ends"),
            }
        }
        let unlock_state = state.clone();
        let mut post_reads = LocSet::new();
        let mut post_writes = LocSet::new();
        while let Some(ev) = events.peek() {
            match ev {
                Event::Lock(_) => break,
                Event::Read { loc, .. } => {
                    post_reads.insert(symbols.loc(loc).unwrap());
                    events.next();
                }
                Event::Write { loc, value } => {
                    let id = symbols.loc(loc).unwrap();
                    state.set(id, *value);
                    post_writes.insert(id);
                    events.next();
                }
                Event::Unlock(_) => unreachable!("validation: locks alternate"),
            }
        }
        segments.push(SegmentPair {
            lock,
            lock_state,
            cs_reads,
            cs_writes,
            unlock_state,
            post_reads,
            post_writes,
            post_state: state.clone(),
        });
    }
    Ok(StateTrace {
        segments,
        terminated: true,
    })
}

/// Builds the transition trace of a (possibly nested) event trace: one tuple
/// per synchronization event carrying the accesses up to the next one.
pub fn build_transition_trace(
    trace: &EventTrace,
    symbols: &Symbols,
) -> Result<TransitionTrace, BuildError> {
    validated(trace, SyncMode::Nested)?;
    let mut state = initial_state(trace, symbols);
    let mut tuples = Vec::new();
    let mut events = trace.events.iter().peekable();

    while let Some(ev) = events.next() {
        let (lock_name, op) = match ev {
            Event::Lock(l) => (l, SyncKind::Lock),
            Event::Unlock(l) => (l, SyncKind::Unlock),
            _ => unreachable!("validation: the trace starts with a sync event"),
        };
        let lock = symbols.lock(lock_name).expect("trace names are interned");
        let pre_state = state.clone();
        let mut reads = LocSet::new();
        let mut writes = LocSet::new();
        while let Some(ev) = events.peek() {
            match ev {
                Event::Lock(_) | Event::Unlock(_) => break,
                Event::Read { loc, .. } => {
                    reads.insert(symbols.loc(loc).unwrap());
                    events.next();
                }
                Event::Write { loc, value } => {
                    let id = symbols.loc(loc).unwrap();
                    state.set(id, *value);
                    writes.insert(id);
                    events.next();
                }
            }
        }
        tuples.push(TransitionTuple {
            lock,
            op,
            pre_state,
            reads,
            writes,
            post_state: state.clone(),
        });
    }
    Ok(TransitionTrace {
        tuples,
        terminated: true,
    })
}

/// Enumeration limits for the trace-set builders.
#[derive(Debug, Clone)]
pub struct EnumConfig {
    /// Values a havocked location may take.
    pub domain: Vec<i64>,
    /// Budget on the number of enumerated traces.
    pub max_traces: usize,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig {
            domain: vec![0, 1, 2],
            max_traces: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EnumError {
    #[error("trace-set enumeration exceeded {max_traces} traces")]
    BudgetExceeded { max_traces: usize },
}

/// Calls `f` once per assignment of `domain` values to the `free` locations
/// on top of `base`, in canonical (odometer) order.
pub(crate) fn for_each_havoc<E>(
    base: &State,
    free: &[LocId],
    domain: &[i64],
    f: &mut dyn FnMut(State) -> Result<(), E>,
) -> Result<(), E> {
    if free.is_empty() {
        return f(base.clone());
    }
    assert!(!domain.is_empty(), "havoc domain must be nonempty");
    let mut counters = vec![0usize; free.len()];
    loop {
        let mut s = base.clone();
        for (slot, &loc) in counters.iter().zip(free) {
            s.set(loc, domain[*slot]);
        }
        f(s)?;
        let mut i = 0;
        loop {
            counters[i] += 1;
            if counters[i] < domain.len() {
                break;
            }
            counters[i] = 0;
            i += 1;
            if i == free.len() {
                return Ok(());
            }
        }
    }
}

fn free_locs(symbols: &Symbols, pinned: &LocSet) -> Vec<LocId> {
    symbols.locs().filter(|l| !pinned.contains(l)).collect()
}

fn insert_trace<T: Ord>(
    out: &mut BTreeSet<T>,
    trace: T,
    config: &EnumConfig,
) -> Result<(), EnumError> {
    out.insert(trace);
    if out.len() > config.max_traces {
        return Err(EnumError::BudgetExceeded {
            max_traces: config.max_traces,
        });
    }
    Ok(())
}

/// The set of state traces of a flat-lock thread over the given initial
/// states, with context havoc drawn from `config.domain`.
///
/// The thread must be well formed in non-nested mode, and `s0s` are the
/// states observed at the first lock.
pub fn enumerate_state_traces(
    thread: &CompiledThread,
    symbols: &Symbols,
    s0s: &[State],
    config: &EnumConfig,
) -> Result<BTreeSet<StateTrace>, EnumError> {
    let mut out = BTreeSet::new();
    for s0 in s0s {
        enum_segments(
            thread,
            symbols,
            Cursor::start(thread),
            s0.clone(),
            Vec::new(),
            config,
            &mut out,
        )?;
    }
    Ok(out)
}

fn enum_segments(
    thread: &CompiledThread,
    symbols: &Symbols,
    mut cursor: Cursor,
    mut state: State,
    segments: Vec<SegmentPair>,
    config: &EnumConfig,
    out: &mut BTreeSet<StateTrace>,
) -> Result<(), EnumError> {
    // Rest the cursor on the next lock (a no-op between segments; at entry it
    // settles leading local computation).
    let mut r = LocSet::new();
    let mut w = LocSet::new();
    let end = run_portion(thread, &mut cursor, &mut state, &mut r, &mut w);
    debug_assert!(
        r.is_empty() && w.is_empty(),
        "well-formed threads access no memory before the first lock"
    );
    match end {
        PortionEnd::Terminated => insert_trace(
            out,
            StateTrace {
                segments,
                terminated: true,
            },
            config,
        ),
        PortionEnd::AtUnlock(_) => {
            unreachable!("non-nested well-formedness puts unlocks after locks")
        }
        PortionEnd::AtLock(_) => {
            let free = match segments.last() {
                // The caller's s0 already is the state at the first lock.
                None => Vec::new(),
                Some(last) => free_locs(symbols, &last.post_accesses()),
            };
            for_each_havoc(&state, &free, &config.domain, &mut |havocked| {
                let mut cursor = cursor.clone();
                let mut state = havocked;
                let mut segments = segments.clone();
                segments.push(run_segment(thread, &mut cursor, &mut state));
                enum_segments(thread, symbols, cursor, state, segments, config, out)
            })
        }
    }
}

/// Runs one lock..next-lock segment; the cursor must rest on the lock op.
fn run_segment(thread: &CompiledThread, cursor: &mut Cursor, state: &mut State) -> SegmentPair {
    let lock_state = state.clone();
    let PortionEnd::AtLock(lock) = take_sync(thread, cursor) else {
        panic!("segment must start at a lock");
    };
    let mut cs_reads = LocSet::new();
    let mut cs_writes = LocSet::new();
    let end = run_portion(thread, cursor, state, &mut cs_reads, &mut cs_writes);
    assert!(
        matches!(end, PortionEnd::AtUnlock(_)),
        "non-nested critical sections end with an unlock"
    );
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

/// The set of transition traces of a (possibly nested) thread.
///
/// Havoc happens only at lock tuples, confined to locations outside
/// everything the thread accessed since its previous unlock (or entry);
/// unlock tuples carry the state over unchanged.
pub fn enumerate_transition_traces(
    thread: &CompiledThread,
    symbols: &Symbols,
    s0s: &[State],
    config: &EnumConfig,
) -> Result<BTreeSet<TransitionTrace>, EnumError> {
    let mut out = BTreeSet::new();
    for s0 in s0s {
        enum_tuples(
            thread,
            symbols,
            Cursor::start(thread),
            s0.clone(),
            TransitionTrace {
                tuples: Vec::new(),
                terminated: false,
            },
            config,
            &mut out,
        )?;
    }
    Ok(out)
}

fn enum_tuples(
    thread: &CompiledThread,
    symbols: &Symbols,
    mut cursor: Cursor,
    mut state: State,
    trace: TransitionTrace,
    config: &EnumConfig,
    out: &mut BTreeSet<TransitionTrace>,
) -> Result<(), EnumError> {
    let mut r = LocSet::new();
    let mut w = LocSet::new();
    let end = run_portion(thread, &mut cursor, &mut state, &mut r, &mut w);
    debug_assert!(
        r.is_empty() && w.is_empty(),
        "well-formed threads access no memory before the first sync"
    );
    match end {
        PortionEnd::Terminated => insert_trace(
            out,
            TransitionTrace {
                terminated: true,
                ..trace
            },
            config,
        ),
        PortionEnd::AtUnlock(_) => {
            // No havoc at unlocks: the state carries over.
            let (cursor, state, trace) = run_tuple(thread, cursor, state, trace);
            enum_tuples(thread, symbols, cursor, state, trace, config, out)
        }
        PortionEnd::AtLock(_) => {
            let i = trace.tuples.len();
            let free = if i == 0 {
                Vec::new() // the caller's s0 is the state at the first sync
            } else {
                let j = trace.prev_unlock(i - 1);
                let window = trace.access_window(j, i as isize - 1);
                free_locs(symbols, &window)
            };
            for_each_havoc(&state, &free, &config.domain, &mut |havocked| {
                let (cursor, state, trace) =
                    run_tuple(thread, cursor.clone(), havocked, trace.clone());
                enum_tuples(thread, symbols, cursor, state, trace, config, out)
            })
        }
    }
}

/// Executes the sync op under the cursor and its trailing memory portion,
/// appending the tuple.
fn run_tuple(
    thread: &CompiledThread,
    mut cursor: Cursor,
    mut state: State,
    mut trace: TransitionTrace,
) -> (Cursor, State, TransitionTrace) {
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
    (cursor, state, trace)
}

/// Independent re-check that a state trace belongs to the thread's trace set:
/// segments replay from their recorded lock states with the recorded sets and
/// states, program counters chain from thread entry, and the context-havoc
/// constraint holds at every boundary.
pub fn validate_state_trace_membership(trace: &StateTrace, thread: &CompiledThread) -> bool {
    let num_locs = match trace.segments.first() {
        Some(s) => s.lock_state.num_locs(),
        None => 0,
    };
    let mut cursor = Cursor::start(thread);
    let mut scratch = State::zeroed(num_locs);
    let mut prev: Option<&SegmentPair> = None;
    for seg in &trace.segments {
        let mut r = LocSet::new();
        let mut w = LocSet::new();
        match run_portion(thread, &mut cursor, &mut scratch, &mut r, &mut w) {
            PortionEnd::AtLock(_) if r.is_empty() && w.is_empty() => {}
            _ => return false,
        }
        // Havoc constraint: recently accessed locations keep their value.
        if let Some(p) = prev {
            if p.post_accesses()
                .iter()
                .any(|&x| p.post_state.get(x) != seg.lock_state.get(x))
            {
                return false;
            }
        }
        let mut state = seg.lock_state.clone();
        if &run_segment(thread, &mut cursor, &mut state) != seg {
            return false;
        }
        scratch = state;
        prev = Some(seg);
    }
    let mut r = LocSet::new();
    let mut w = LocSet::new();
    match run_portion(thread, &mut cursor, &mut scratch, &mut r, &mut w) {
        PortionEnd::Terminated => trace.terminated && r.is_empty() && w.is_empty(),
        PortionEnd::AtLock(_) => !trace.terminated,
        PortionEnd::AtUnlock(_) => false,
    }
}

/// Independent re-check of transition-trace membership, including the
/// no-havoc-at-unlocks rule and the windowed havoc rule at locks.
pub fn validate_transition_trace_membership(
    trace: &TransitionTrace,
    thread: &CompiledThread,
) -> bool {
    let num_locs = match trace.tuples.first() {
        Some(t) => t.pre_state.num_locs(),
        None => 0,
    };
    let mut cursor = Cursor::start(thread);
    let mut scratch = State::zeroed(num_locs);
    for (i, tuple) in trace.tuples.iter().enumerate() {
        let mut r = LocSet::new();
        let mut w = LocSet::new();
        let end = run_portion(thread, &mut cursor, &mut scratch, &mut r, &mut w);
        if !r.is_empty() || !w.is_empty() {
            return false;
        }
        let arrived = match end {
            PortionEnd::AtLock(l) => (l, SyncKind::Lock),
            PortionEnd::AtUnlock(l) => (l, SyncKind::Unlock),
            PortionEnd::Terminated => return false,
        };
        if arrived != (tuple.lock, tuple.op) {
            return false;
        }
        if i > 0 {
            let prev_post = &trace.tuples[i - 1].post_state;
            match tuple.op {
                SyncKind::Unlock => {
                    if &tuple.pre_state != prev_post {
                        return false;
                    }
                }
                SyncKind::Lock => {
                    let j = trace.prev_unlock(i - 1);
                    let window = trace.access_window(j, i as isize - 1);
                    if window
                        .iter()
                        .any(|&x| tuple.pre_state.get(x) != prev_post.get(x))
                    {
                        return false;
                    }
                }
            }
        }
        let empty = TransitionTrace {
            tuples: Vec::new(),
            terminated: false,
        };
        let (c2, s2, replayed) = run_tuple(thread, cursor, tuple.pre_state.clone(), empty);
        if &replayed.tuples[0] != tuple {
            return false;
        }
        cursor = c2;
        scratch = s2;
    }
    let mut r = LocSet::new();
    let mut w = LocSet::new();
    match run_portion(thread, &mut cursor, &mut scratch, &mut r, &mut w) {
        PortionEnd::Terminated => trace.terminated && r.is_empty() && w.is_empty(),
        _ => !trace.terminated,
    }
}
