//! Refinement checking for lock-synchronized threads under the SC-for-DRF
//! execution model.
//!
//! The crate decides whether a transformed thread refines the original by
//! comparing them at synchronization operations instead of searching for a
//! sequence of event transformations:
//!
//! - [`thread_lang`]: a deterministic toy thread language with `.thr` sources.
//! - [`exec`]: interleaving semantics, race detectors and de-interleaving.
//! - [`trace_model`]: event traces and the `.trc` interchange format.
//! - [`state_traces`]: the coarse per-thread abstractions (state traces for
//!   flat locks, transition traces for nested locks) and their enumeration
//!   under context havoc.
//! - [`matcher`]: the trace matching predicates, the linear-time trace-pair
//!   checker and the exhaustive `check`/`check_nested` decision procedures.
//! - [`event_oracle`]: an event-transformation baseline matcher used for
//!   cross-validation and benchmarking.
//! - [`harness`]: corpus generation and timing harness.

pub mod event_oracle;
pub mod exec;
pub mod harness;
pub mod matcher;
pub mod report;
pub mod state_traces;
pub mod symbols;
pub mod thread_lang;
pub mod trace_model;
