//! Data-race detection over executions.
//!
//! Two detectors: the happens-before race (conflicting accesses unordered by
//! the transitive closure of sequenced-before and unlock-to-lock
//! synchronizes-with edges, tracked with vector clocks) and the adjacent
//! access race (conflicting accesses next to each other in the interleaving).
//! At the program level the two coincide, which the test suite samples.

use super::{CompiledProgram, ExecError, ProgramConfig, StepInfo};
use crate::symbols::{LocId, State};
use std::ops::ControlFlow;
use std::sync::Arc;

type Clock = Vec<u32>;

fn joined(a: &mut Clock, b: &Clock) {
    for (x, y) in a.iter_mut().zip(b) {
        *x = (*x).max(*y);
    }
}

/// Incremental happens-before race detector (exact up to the first race).
#[derive(Debug, Clone)]
pub(crate) struct HbState {
    thread_clocks: Vec<Clock>,
    lock_clocks: Vec<Clock>,
    /// Per location: last write as (thread, clock-entry, step index).
    writes: Vec<Option<(usize, u32, usize)>>,
    /// Per location and thread: last read as (clock-entry, step index).
    reads: Vec<Vec<Option<(u32, usize)>>>,
    next_index: usize,
}

impl HbState {
    pub fn new(num_threads: usize, num_locks: usize, num_locs: usize) -> HbState {
        HbState {
            thread_clocks: vec![vec![0; num_threads]; num_threads],
            lock_clocks: vec![vec![0; num_threads]; num_locks],
            writes: vec![None; num_locs],
            reads: vec![vec![None; num_threads]; num_locs],
            next_index: 0,
        }
    }

    /// Feeds one step; returns the racing pair of step indices if this step
    /// closes a race.
    pub fn feed(&mut self, step: &StepInfo) -> Option<(usize, usize, LocId)> {
        use super::StepKind::*;
        let t = step.thread;
        let index = self.next_index;
        self.next_index += 1;
        match step.kind {
            Lock(l) => {
                let lc = self.lock_clocks[l.index()].clone();
                joined(&mut self.thread_clocks[t], &lc);
                self.thread_clocks[t][t] += 1;
                None
            }
            Unlock(l) => {
                self.thread_clocks[t][t] += 1;
                self.lock_clocks[l.index()] = self.thread_clocks[t].clone();
                None
            }
            Read(loc, _) => {
                self.thread_clocks[t][t] += 1;
                let vc = &self.thread_clocks[t];
                if let Some((wt, wc, wi)) = self.writes[loc.index()] {
                    if wt != t && vc[wt] < wc {
                        return Some((wi, index, loc));
                    }
                }
                self.reads[loc.index()][t] = Some((self.thread_clocks[t][t], index));
                None
            }
            Write(loc, _) => {
                self.thread_clocks[t][t] += 1;
                let vc = self.thread_clocks[t].clone();
                if let Some((wt, wc, wi)) = self.writes[loc.index()] {
                    if wt != t && vc[wt] < wc {
                        return Some((wi, index, loc));
                    }
                }
                for (rt, slot) in self.reads[loc.index()].iter().enumerate() {
                    if let Some((rc, ri)) = *slot {
                        if rt != t && vc[rt] < rc {
                            return Some((ri, index, loc));
                        }
                    }
                }
                // The write is ordered after every prior access to the
                // location, so earlier history can be forgotten.
                self.writes[loc.index()] = Some((t, vc[t], index));
                self.reads[loc.index()] = vec![None; vc.len()];
                None
            }
        }
    }
}

/// First happens-before data race in the step sequence, as
/// `(earlier index, later index, location)`.
pub fn hb_race(
    steps: &[StepInfo],
    num_threads: usize,
    num_locks: usize,
    num_locs: usize,
) -> Option<(usize, usize, LocId)> {
    let mut state = HbState::new(num_threads, num_locks, num_locs);
    for step in steps {
        if let Some(hit) = state.feed(step) {
            return Some(hit);
        }
    }
    None
}

/// First adjacent access data race: consecutive conflicting steps of
/// different threads.
pub fn adjacent_race(steps: &[StepInfo]) -> Option<(usize, usize, LocId)> {
    steps.windows(2).enumerate().find_map(|(i, w)| {
        if w[0].thread != w[1].thread && w[0].conflicts_with(&w[1]) {
            Some((i, i + 1, w[0].mem_loc().unwrap()))
        } else {
            None
        }
    })
}

/// Which race definition a scan uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    HappensBefore,
    Adjacent,
}

/// A racy execution prefix: the steps up to and including the racing access.
#[derive(Debug, Clone)]
pub struct RaceWitness {
    pub steps: Vec<StepInfo>,
    pub first: usize,
    pub second: usize,
    pub loc: LocId,
}

/// Whether some execution of the program from one of `s0s` contains a data
/// race. Stops at the first witness.
pub fn program_race(
    program: &Arc<CompiledProgram>,
    s0s: &[State],
    max_steps: usize,
    detector: Detector,
) -> Result<Option<RaceWitness>, ExecError> {
    let num_threads = program.num_threads();
    let num_locks = program.symbols.num_locks();
    let num_locs = program.symbols.num_locs();
    let mut witness = None;
    let mut truncated = false;
    for s0 in s0s {
        let config = ProgramConfig::initial(Arc::clone(program), s0.clone());
        let hb = HbState::new(num_threads, num_locks, num_locs);
        let mut steps = Vec::new();
        let flow = race_dfs(
            &config,
            hb,
            &mut steps,
            max_steps,
            detector,
            &mut witness,
            &mut truncated,
        );
        if flow.is_break() {
            return Ok(witness);
        }
    }
    if truncated {
        return Err(ExecError::BudgetExceeded { max_steps });
    }
    Ok(None)
}

fn race_dfs(
    config: &ProgramConfig,
    hb: HbState,
    steps: &mut Vec<StepInfo>,
    max_steps: usize,
    detector: Detector,
    witness: &mut Option<RaceWitness>,
    truncated: &mut bool,
) -> ControlFlow<()> {
    if config.all_terminated() {
        return ControlFlow::Continue(());
    }
    if steps.len() >= max_steps {
        *truncated = true;
        return ControlFlow::Continue(());
    }
    for t in 0..config.pcs.len() {
        if !config.is_enabled(t) {
            continue;
        }
        let mut next = config.clone();
        let info = next.step_mut(t);
        steps.push(info);
        let hit = match detector {
            Detector::HappensBefore => {
                let mut hb2 = hb.clone();
                let hit = hb2.feed(&info);
                if hit.is_none() {
                    let flow = race_dfs(&next, hb2, steps, max_steps, detector, witness, truncated);
                    if flow.is_break() {
                        return ControlFlow::Break(());
                    }
                }
                hit
            }
            Detector::Adjacent => {
                let n = steps.len();
                let hit = if n >= 2 {
                    let (a, b) = (&steps[n - 2], &steps[n - 1]);
                    if a.thread != b.thread && a.conflicts_with(b) {
                        Some((n - 2, n - 1, a.mem_loc().unwrap()))
                    } else {
                        None
                    }
                } else {
                    None
                };
                if hit.is_none() {
                    let flow = race_dfs(&next, hb.clone(), steps, max_steps, detector, witness, truncated);
                    if flow.is_break() {
                        return ControlFlow::Break(());
                    }
                }
                hit
            }
        };
        if let Some((first, second, loc)) = hit {
            *witness = Some(RaceWitness {
                steps: steps.clone(),
                first,
                second,
                loc,
            });
            return ControlFlow::Break(());
        }
        steps.pop();
    }
    ControlFlow::Continue(())
}
