//! De-interleaving of race-free execution prefixes.
//!
//! A race-free prefix can be reordered so that each thread's execution from a
//! lock acquisition to its next one is contiguous, without changing the final
//! state: a non-lock step has no happens-before edge from the other threads'
//! steps back to its own previous step, so (absent races) it conflicts with
//! none of them and commutes over them.

use super::{hb_race, ExecutionFragment, StepInfo};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CoarsenError {
    #[error("execution contains an hb data race (steps {first} and {second})")]
    PreconditionViolated { first: usize, second: usize },
}

/// Returns an equivalent execution with contiguous lock-to-lock portions.
///
/// The result replays the same per-thread step sequences in a new
/// interleaving and ends in the same final state.
pub fn coarsen(e: &ExecutionFragment) -> Result<ExecutionFragment, CoarsenError> {
    let program = e.program();
    if let Some((first, second, _)) = hb_race(
        &e.steps,
        program.num_threads(),
        program.symbols.num_locks(),
        program.symbols.num_locs(),
    ) {
        return Err(CoarsenError::PreconditionViolated { first, second });
    }

    let mut steps: Vec<StepInfo> = e.steps.clone();
    let mut i = 0;
    while i < steps.len() {
        if steps[i].is_lock() {
            i += 1;
            continue;
        }
        // The previous step of the same thread; a step with none stays put
        // (well-formed threads begin with a lock, so this is the normal case
        // only for index 0).
        let prev = (0..i).rev().find(|&j| steps[j].thread == steps[i].thread);
        let target = match prev {
            Some(j) => j + 1,
            None => {
                i += 1;
                continue;
            }
        };
        if target < i {
            for k in target..i {
                assert!(
                    !steps[k].conflicts_with(&steps[i]),
                    "conflicting unordered steps in a race-free prefix"
                );
                assert!(
                    !(steps[i].is_sync() && steps[k].lock_id() == steps[i].lock_id()),
                    "lock operations on a held lock cannot interleave"
                );
            }
            let moved = steps.remove(i);
            steps.insert(target, moved);
        }
        i += 1;
    }

    // Replaying validates that every move was legal: each step must still
    // execute with the recorded kind, location and value.
    Ok(ExecutionFragment::replay(
        e.configs[0].clone(),
        &steps,
        e.outcome,
    ))
}

/// Structural postcondition of [`coarsen`]: every non-lock step immediately
/// follows its thread's previous step, so lock-to-lock portions of a thread
/// are never interleaved with other threads.
pub fn is_coarse(steps: &[StepInfo]) -> bool {
    for (i, step) in steps.iter().enumerate() {
        if step.is_lock() {
            continue;
        }
        if let Some(j) = (0..i).rev().find(|&j| steps[j].thread == step.thread) {
            if j + 1 != i {
                return false;
            }
        }
    }
    true
}
