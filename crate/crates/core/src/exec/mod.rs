//! Interleaving semantics for parallel compositions of threads.
//!
//! A program configuration holds per-thread program counters and registers,
//! the lock ownership map and the shared state. One transition step executes
//! exactly one shared access or one lock operation of one thread; local
//! computation is folded into the surrounding steps, so configurations always
//! rest either on an observable operation or at thread exit.

mod coarsen;
mod compile;
mod race;
mod single;

pub use coarsen::{coarsen, is_coarse, CoarsenError};
pub use compile::{compile_thread, compile_threads, CompileError, CompiledThread};
pub use race::{adjacent_race, hb_race, program_race, Detector, RaceWitness};
pub(crate) use single::{run_portion, take_sync, Cursor};
pub use single::{standalone_steps, standalone_trace, PortionEnd};

use crate::symbols::{LocId, LockId, State, Symbols};
use crate::thread_lang::ThreadProgram;
use crate::trace_model::{Event, EventTrace};
use compile::Op;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::sync::Arc;
use thiserror::Error;

/// A parallel composition of compiled threads over one symbol table.
#[derive(Debug)]
pub struct CompiledProgram {
    pub symbols: Symbols,
    pub threads: Vec<CompiledThread>,
}

impl CompiledProgram {
    pub fn compile(threads: &[ThreadProgram]) -> Result<Arc<CompiledProgram>, CompileError> {
        Self::compile_seeded(threads, Symbols::new())
    }

    /// Compiles against a pre-seeded symbol table. Compositions that must
    /// share one memory universe (to compare their semantics) intern all
    /// names first and seed each compilation with the same table.
    pub fn compile_seeded(
        threads: &[ThreadProgram],
        symbols: Symbols,
    ) -> Result<Arc<CompiledProgram>, CompileError> {
        let refs: Vec<&ThreadProgram> = threads.iter().collect();
        let mut symbols = symbols;
        let compiled = compile_threads(&refs, &mut symbols)?;
        Ok(Arc::new(CompiledProgram {
            symbols,
            threads: compiled,
        }))
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    /// All-zero state over this program's location universe.
    pub fn zero_state(&self) -> State {
        State::zeroed(self.symbols.num_locs())
    }
}

/// One observable execution step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Lock(LockId),
    Unlock(LockId),
    Read(LocId, i64),
    Write(LocId, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepInfo {
    pub thread: usize,
    pub kind: StepKind,
}

impl StepInfo {
    pub fn is_write(&self) -> bool {
        matches!(self.kind, StepKind::Write(..))
    }

    pub fn is_read(&self) -> bool {
        matches!(self.kind, StepKind::Read(..))
    }

    pub fn is_mem(&self) -> bool {
        self.is_read() || self.is_write()
    }

    pub fn is_lock(&self) -> bool {
        matches!(self.kind, StepKind::Lock(_))
    }

    pub fn is_sync(&self) -> bool {
        matches!(self.kind, StepKind::Lock(_) | StepKind::Unlock(_))
    }

    pub fn mem_loc(&self) -> Option<LocId> {
        match self.kind {
            StepKind::Read(loc, _) | StepKind::Write(loc, _) => Some(loc),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<i64> {
        match self.kind {
            StepKind::Read(_, v) | StepKind::Write(_, v) => Some(v),
            _ => None,
        }
    }

    pub fn lock_id(&self) -> Option<LockId> {
        match self.kind {
            StepKind::Lock(l) | StepKind::Unlock(l) => Some(l),
            _ => None,
        }
    }

    /// Same location and at least one write (memory steps only).
    pub fn conflicts_with(&self, other: &StepInfo) -> bool {
        match (self.mem_loc(), other.mem_loc()) {
            (Some(a), Some(b)) => a == b && (self.is_write() || other.is_write()),
            _ => false,
        }
    }

    pub fn to_event(&self, symbols: &Symbols) -> Event {
        match self.kind {
            StepKind::Lock(l) => Event::Lock(symbols.lock_name(l).to_string()),
            StepKind::Unlock(l) => Event::Unlock(symbols.lock_name(l).to_string()),
            StepKind::Read(loc, value) => Event::Read {
                loc: symbols.loc_name(loc).to_string(),
                value,
            },
            StepKind::Write(loc, value) => Event::Write {
                loc: symbols.loc_name(loc).to_string(),
                value,
            },
        }
    }
}

/// Conflict predicate over two step indices of a fragment.
pub fn conflict(steps: &[StepInfo], i: usize, j: usize) -> bool {
    steps[i].conflicts_with(&steps[j])
}

/// Immutable snapshot of a program configuration.
#[derive(Debug, Clone)]
pub struct ProgramConfig {
    pub program: Arc<CompiledProgram>,
    pub(crate) pcs: Vec<usize>,
    pub(crate) regs: Vec<Vec<i64>>,
    pub(crate) lock_holders: Vec<Option<usize>>,
    pub state: State,
}

/// Result of stepping one thread.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Stepped(ProgramConfig, StepInfo),
    /// The thread is at a lock held by another thread.
    Blocked,
    Terminated,
}

impl ProgramConfig {
    pub fn initial(program: Arc<CompiledProgram>, s0: State) -> ProgramConfig {
        assert_eq!(
            s0.num_locs(),
            program.symbols.num_locs(),
            "initial state universe does not match the program"
        );
        let mut config = ProgramConfig {
            pcs: vec![0; program.threads.len()],
            regs: program
                .threads
                .iter()
                .map(|t| vec![0; t.num_regs])
                .collect(),
            lock_holders: vec![None; program.symbols.num_locks()],
            state: s0,
            program,
        };
        for t in 0..config.pcs.len() {
            config.settle(t);
        }
        config
    }

    /// Runs pure ops (register moves, branches, jumps) until the thread rests
    /// on an observable op or exits. Bounded loops guarantee termination.
    fn settle(&mut self, thread: usize) {
        let ops = &self.program.threads[thread].ops;
        let regs = &mut self.regs[thread];
        let mut pc = self.pcs[thread];
        while let Some(op) = ops.get(pc) {
            match op {
                Op::Set { dst, src } => {
                    regs[*dst] = src.eval(regs);
                    pc += 1;
                }
                Op::BranchZero { cond, target } => {
                    pc = if cond.eval(regs) == 0 { *target } else { pc + 1 };
                }
                Op::Jump(target) => pc = *target,
                _ => break,
            }
        }
        self.pcs[thread] = pc;
    }

    pub fn is_terminated(&self, thread: usize) -> bool {
        self.pcs[thread] >= self.program.threads[thread].ops.len()
    }

    pub fn all_terminated(&self) -> bool {
        (0..self.pcs.len()).all(|t| self.is_terminated(t))
    }

    /// The lock the thread is about to acquire, if any.
    pub fn at_lock(&self, thread: usize) -> Option<LockId> {
        match self.program.threads[thread].ops.get(self.pcs[thread]) {
            Some(Op::Lock(l)) => Some(*l),
            _ => None,
        }
    }

    pub fn at_unlock(&self, thread: usize) -> Option<LockId> {
        match self.program.threads[thread].ops.get(self.pcs[thread]) {
            Some(Op::Unlock(l)) => Some(*l),
            _ => None,
        }
    }

    pub fn is_blocked(&self, thread: usize) -> bool {
        match self.at_lock(thread) {
            Some(l) => matches!(self.lock_holders[l.index()], Some(h) if h != thread),
            None => false,
        }
    }

    pub fn is_enabled(&self, thread: usize) -> bool {
        !self.is_terminated(thread) && !self.is_blocked(thread)
    }

    pub fn holder(&self, lock: LockId) -> Option<usize> {
        self.lock_holders[lock.index()]
    }

    /// Executes the next observable op of `thread`.
    ///
    /// The caller must have checked `is_enabled`; stepping a blocked thread is
    /// a logic error. Acquiring a free lock, releasing a lock not held by the
    /// thread, or re-acquiring a held one panics: enumeration only runs
    /// well-formed threads.
    pub(crate) fn step_mut(&mut self, thread: usize) -> StepInfo {
        let pc = self.pcs[thread];
        let op = self.program.threads[thread].ops[pc].clone();
        let kind = match op {
            Op::Lock(l) => {
                assert!(
                    self.lock_holders[l.index()].is_none(),
                    "stepping a blocked or ill-formed thread"
                );
                self.lock_holders[l.index()] = Some(thread);
                StepKind::Lock(l)
            }
            Op::Unlock(l) => {
                assert_eq!(
                    self.lock_holders[l.index()],
                    Some(thread),
                    "unlock of a lock the thread does not hold"
                );
                self.lock_holders[l.index()] = None;
                StepKind::Unlock(l)
            }
            Op::Read { loc, dst } => {
                let value = self.state.get(loc);
                self.regs[thread][dst] = value;
                StepKind::Read(loc, value)
            }
            Op::Write { loc, src } => {
                let value = src.eval(&self.regs[thread]);
                self.state.set(loc, value);
                StepKind::Write(loc, value)
            }
            _ => unreachable!("configs rest on observable ops"),
        };
        self.pcs[thread] = pc + 1;
        self.settle(thread);
        StepInfo { thread, kind }
    }

    /// Immutable stepping API.
    pub fn step(&self, thread: usize) -> StepOutcome {
        if self.is_terminated(thread) {
            return StepOutcome::Terminated;
        }
        if self.is_blocked(thread) {
            return StepOutcome::Blocked;
        }
        let mut next = self.clone();
        let info = next.step_mut(thread);
        StepOutcome::Stepped(next, info)
    }
}

/// How an execution fragment ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecOutcome {
    /// All threads reached their final program counter.
    Terminated,
    /// No thread can move but some have not terminated.
    Deadlocked,
    /// The step budget cut the fragment short (or it is a deliberate prefix).
    Truncated,
}

/// An execution fragment: configurations chained by transition steps.
#[derive(Debug, Clone)]
pub struct ExecutionFragment {
    pub configs: Vec<ProgramConfig>,
    pub steps: Vec<StepInfo>,
    pub outcome: ExecOutcome,
}

impl ExecutionFragment {
    pub fn program(&self) -> &Arc<CompiledProgram> {
        &self.configs[0].program
    }

    pub fn initial_state(&self) -> &State {
        &self.configs[0].state
    }

    pub fn final_state(&self) -> &State {
        &self.configs[self.configs.len() - 1].state
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Rebuilds the configuration chain for `steps` starting at `initial`,
    /// asserting that each step replays exactly.
    pub fn replay(initial: ProgramConfig, steps: &[StepInfo], outcome: ExecOutcome) -> Self {
        let mut configs = vec![initial];
        for expected in steps {
            let current = configs.last().unwrap();
            assert!(
                current.is_enabled(expected.thread),
                "replayed step {expected:?} is not enabled"
            );
            let mut next = current.clone();
            let info = next.step_mut(expected.thread);
            assert_eq!(&info, expected, "replay diverged from the recorded step");
            configs.push(next);
        }
        ExecutionFragment {
            configs,
            steps: steps.to_vec(),
            outcome,
        }
    }

    /// Per-thread event traces; the shared init covers the whole universe.
    pub fn per_thread_traces(&self) -> Vec<EventTrace> {
        let program = self.program();
        let symbols = &program.symbols;
        let init: std::collections::BTreeMap<String, i64> = symbols
            .locs()
            .map(|loc| (symbols.loc_name(loc).to_string(), self.initial_state().get(loc)))
            .collect();
        let mut traces = vec![
            EventTrace {
                init,
                events: Vec::new()
            };
            program.num_threads()
        ];
        for step in &self.steps {
            traces[step.thread].events.push(step.to_event(symbols));
        }
        traces
    }

    /// Combined interleaving log, one line per step: `idx thread op loc value`.
    pub fn interleaving_log(&self) -> String {
        let symbols = &self.program().symbols;
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            let (op, target, value) = match step.kind {
                StepKind::Lock(l) => ("lock", symbols.lock_name(l), "-".to_string()),
                StepKind::Unlock(l) => ("unlock", symbols.lock_name(l), "-".to_string()),
                StepKind::Read(x, v) => ("read", symbols.loc_name(x), v.to_string()),
                StepKind::Write(x, v) => ("write", symbols.loc_name(x), v.to_string()),
            };
            writeln!(out, "{i} {} {op} {target} {value}", step.thread).unwrap();
        }
        out
    }
}

/// Callback view of one complete interleaving during a walk.
pub struct ExecView<'a> {
    pub steps: &'a [StepInfo],
    pub final_config: &'a ProgramConfig,
    pub outcome: ExecOutcome,
}

/// Statistics of an exhaustive walk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WalkSummary {
    pub executions: usize,
    pub deadlocks: usize,
    pub truncated: usize,
    /// True when the callback stopped the walk before it was exhaustive.
    pub stopped_early: bool,
}

/// Depth-first enumeration of all maximal interleavings from `s0`, calling
/// `f` once per maximal fragment. Scheduler choices are explored in thread
/// order, so the walk is deterministic.
pub fn for_each_execution(
    program: &Arc<CompiledProgram>,
    s0: &State,
    max_steps: usize,
    f: &mut dyn FnMut(ExecView<'_>) -> ControlFlow<()>,
) -> WalkSummary {
    let mut summary = WalkSummary::default();
    let mut steps: Vec<StepInfo> = Vec::new();
    let initial = ProgramConfig::initial(Arc::clone(program), s0.clone());
    let _ = dfs(&initial, &mut steps, max_steps, f, &mut summary);
    summary
}

fn dfs(
    config: &ProgramConfig,
    steps: &mut Vec<StepInfo>,
    max_steps: usize,
    f: &mut dyn FnMut(ExecView<'_>) -> ControlFlow<()>,
    summary: &mut WalkSummary,
) -> ControlFlow<()> {
    let outcome = if config.all_terminated() {
        Some(ExecOutcome::Terminated)
    } else if (0..config.pcs.len()).all(|t| !config.is_enabled(t)) {
        Some(ExecOutcome::Deadlocked)
    } else if steps.len() >= max_steps {
        Some(ExecOutcome::Truncated)
    } else {
        None
    };
    if let Some(outcome) = outcome {
        match outcome {
            ExecOutcome::Terminated => summary.executions += 1,
            ExecOutcome::Deadlocked => summary.deadlocks += 1,
            ExecOutcome::Truncated => summary.truncated += 1,
        }
        let flow = f(ExecView {
            steps,
            final_config: config,
            outcome,
        });
        if flow.is_break() {
            summary.stopped_early = true;
        }
        return flow;
    }
    for t in 0..config.pcs.len() {
        if !config.is_enabled(t) {
            continue;
        }
        let mut next = config.clone();
        let info = next.step_mut(t);
        steps.push(info);
        let flow = dfs(&next, steps, max_steps, f, summary);
        steps.pop();
        flow?;
    }
    ControlFlow::Continue(())
}

/// Collects every maximal interleaving as a full fragment. Prefer
/// [`for_each_execution`] for large spaces.
pub fn enumerate_executions(
    program: &Arc<CompiledProgram>,
    s0: &State,
    max_steps: usize,
) -> Vec<ExecutionFragment> {
    let mut out = Vec::new();
    for_each_execution(program, s0, max_steps, &mut |view| {
        let initial = ProgramConfig::initial(Arc::clone(program), s0.clone());
        out.push(ExecutionFragment::replay(initial, view.steps, view.outcome));
        ControlFlow::Continue(())
    });
    out
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("interleaving enumeration exceeded {max_steps} steps")]
    BudgetExceeded { max_steps: usize },
}

/// The set of initial/final state pairs of finite executions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SemanticsSet {
    pub pairs: BTreeSet<(State, State)>,
}

impl SemanticsSet {
    pub fn is_subset_of(&self, other: &SemanticsSet) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    pub fn finals_for(&self, s0: &State) -> impl Iterator<Item = &State> {
        let s0 = s0.clone();
        self.pairs
            .iter()
            .filter(move |(s, _)| *s == s0)
            .map(|(_, s)| s)
    }
}

/// Program semantics over the given initial states. Only terminated
/// executions contribute; deadlocked branches are dropped. Truncation is an
/// error since it would make the result an under-approximation.
pub fn semantics(
    program: &Arc<CompiledProgram>,
    s0s: &[State],
    max_steps: usize,
) -> Result<SemanticsSet, ExecError> {
    let mut set = SemanticsSet::default();
    for s0 in s0s {
        let summary = for_each_execution(program, s0, max_steps, &mut |view| {
            if view.outcome == ExecOutcome::Terminated {
                set.pairs
                    .insert((s0.clone(), view.final_config.state.clone()));
            }
            ControlFlow::Continue(())
        });
        if summary.truncated > 0 {
            return Err(ExecError::BudgetExceeded { max_steps });
        }
    }
    Ok(set)
}
