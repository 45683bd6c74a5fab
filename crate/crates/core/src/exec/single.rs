//! Deterministic single-thread execution.
//!
//! A thread run alone never blocks, so its behavior from a given state is a
//! pure function. This is the engine behind standalone trace collection and
//! the lock-to-lock portion replay used by the coarse trace abstractions.

use super::compile::{CompiledThread, Op};
use crate::symbols::{LocId, LockId, State, Symbols};
use crate::trace_model::EventTrace;
use std::collections::BTreeSet;

/// Cursor of a single thread: program counter plus registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Cursor {
    pub pc: usize,
    pub regs: Vec<i64>,
}

impl Cursor {
    pub fn start(thread: &CompiledThread) -> Cursor {
        Cursor {
            pc: 0,
            regs: vec![0; thread.num_regs],
        }
    }
}

/// Where a portion run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortionEnd {
    /// The thread rests on a lock acquisition it has not executed yet.
    AtLock(LockId),
    /// The thread rests on an unlock it has not executed yet.
    AtUnlock(LockId),
    Terminated,
}

fn settle(thread: &CompiledThread, cursor: &mut Cursor) {
    while let Some(op) = thread.ops.get(cursor.pc) {
        match op {
            Op::Set { dst, src } => {
                cursor.regs[*dst] = src.eval(&cursor.regs);
                cursor.pc += 1;
            }
            Op::BranchZero { cond, target } => {
                cursor.pc = if cond.eval(&cursor.regs) == 0 {
                    *target
                } else {
                    cursor.pc + 1
                };
            }
            Op::Jump(target) => cursor.pc = *target,
            _ => break,
        }
    }
}

/// Runs memory accesses from the cursor until the next synchronization
/// operation or thread exit, mutating `state` and collecting the read and
/// write sets. The synchronization op itself is not executed.
pub(crate) fn run_portion(
    thread: &CompiledThread,
    cursor: &mut Cursor,
    state: &mut State,
    reads: &mut BTreeSet<LocId>,
    writes: &mut BTreeSet<LocId>,
) -> PortionEnd {
    loop {
        settle(thread, cursor);
        match thread.ops.get(cursor.pc) {
            None => return PortionEnd::Terminated,
            Some(Op::Lock(l)) => return PortionEnd::AtLock(*l),
            Some(Op::Unlock(l)) => return PortionEnd::AtUnlock(*l),
            Some(Op::Read { loc, dst }) => {
                cursor.regs[*dst] = state.get(*loc);
                reads.insert(*loc);
                cursor.pc += 1;
            }
            Some(Op::Write { loc, src }) => {
                let value = src.eval(&cursor.regs);
                state.set(*loc, value);
                writes.insert(*loc);
                cursor.pc += 1;
            }
            Some(_) => unreachable!("settle rests on observable ops"),
        }
    }
}

/// Executes the synchronization op the cursor rests on.
pub(crate) fn take_sync(thread: &CompiledThread, cursor: &mut Cursor) -> PortionEnd {
    let end = match thread.ops.get(cursor.pc) {
        Some(Op::Lock(l)) => PortionEnd::AtLock(*l),
        Some(Op::Unlock(l)) => PortionEnd::AtUnlock(*l),
        other => panic!("cursor does not rest on a synchronization op: {other:?}"),
    };
    cursor.pc += 1;
    end
}

/// The step sequence of the thread run alone from `s0` to termination.
/// Locks always succeed; bounded loops guarantee termination.
pub fn standalone_steps(thread: &CompiledThread, s0: &State) -> Vec<super::StepInfo> {
    use super::{StepInfo, StepKind};
    let mut cursor = Cursor::start(thread);
    let mut state = s0.clone();
    let mut steps = Vec::new();
    loop {
        settle(thread, &mut cursor);
        let kind = match thread.ops.get(cursor.pc) {
            None => break,
            Some(Op::Lock(l)) => StepKind::Lock(*l),
            Some(Op::Unlock(l)) => StepKind::Unlock(*l),
            Some(Op::Read { loc, dst }) => {
                let value = state.get(*loc);
                cursor.regs[*dst] = value;
                StepKind::Read(*loc, value)
            }
            Some(Op::Write { loc, src }) => {
                let value = src.eval(&cursor.regs);
                state.set(*loc, value);
                StepKind::Write(*loc, value)
            }
            Some(_) => unreachable!(),
        };
        cursor.pc += 1;
        steps.push(StepInfo { thread: 0, kind });
    }
    steps
}

/// The event trace of the thread run alone from `s0`. The trace's init
/// section covers the whole location universe of `symbols`.
pub fn standalone_trace(thread: &CompiledThread, symbols: &Symbols, s0: &State) -> EventTrace {
    let init = symbols
        .locs()
        .map(|loc| (symbols.loc_name(loc).to_string(), s0.get(loc)))
        .collect();
    let events = standalone_steps(thread, s0)
        .iter()
        .map(|s| s.to_event(symbols))
        .collect();
    EventTrace { init, events }
}
