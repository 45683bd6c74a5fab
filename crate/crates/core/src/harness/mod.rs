//! Corpus generation and benchmarking: random trace pairs with ground truth,
//! random thread programs and refinement pairs, and the timing harness behind
//! the evaluation sweeps.

mod bench;
mod gen;
mod threads;

pub use bench::{
    length_sweep, linear_fit, run_bench, summarize, write_csv, write_manifest, BenchError,
    BenchOptions, BenchRecord, BenchResult, BenchSummary, BinStats, LinFit,
};
pub use gen::{
    gen_pair, BugKind, GenConfig, GenError, GeneratedPair, GroundTruth, TransformMix,
};
pub use threads::{
    apply_rewrite, gen_program, gen_thread, gen_transformed, RewriteKind, ThreadGenConfig,
};
