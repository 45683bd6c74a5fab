//! Command-line surface for batch pipelines.
//!
//! Exit codes are part of the contract so scripts can branch without parsing
//! output: 0 match/true/race-free, 1 mismatch/false/race found, 2 usage or
//! input error, 3 budget exceeded. Human-readable results go to stdout,
//! diagnostics to stderr.

mod config;

use clap::{Parser, Subcommand, ValueEnum};
use refcheck_core::exec::{program_race, CompiledProgram, Detector, StepKind};
use refcheck_core::matcher::{
    check_trace_pair, CheckConfig, CheckError, CheckSession, SessionError, Verdict,
};
use refcheck_core::report::{PairRecord, WitnessRecord};
use refcheck_core::thread_lang::{check_well_formed, parse_thread, SyncMode, ThreadProgram};
use refcheck_core::trace_model::{parse_trace, EventTrace};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_OK: u8 = 0;
const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(
    name = "refcheck",
    about = "State-based refinement checking for lock-synchronized threads",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Hb,
    Adjacent,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether a transformed trace matches an original trace.
    CheckTraces {
        /// The transformed (optimized) trace.
        transformed: PathBuf,
        /// The original (reference) trace.
        original: PathBuf,
        /// Use nested-lock transition matching.
        #[arg(long)]
        nested: bool,
        /// Emit a JSON record instead of text.
        #[arg(long)]
        json: bool,
        /// File of `init <loc> <int>` lines overriding both traces' headers.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Also run the event-transformation oracle and report its sequence.
        #[arg(long)]
        oracle: bool,
    },
    /// Decide refinement between two thread programs by exhaustive
    /// enumeration under context havoc.
    CheckThreads {
        /// The transformed (optimized) thread.
        transformed: PathBuf,
        /// The original (reference) thread.
        original: PathBuf,
        /// Use the nested-lock discipline and matcher.
        #[arg(long)]
        nested: bool,
        /// Havoc value domain.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        domain: Vec<i64>,
        /// Budget on enumerated transformed traces.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        #[arg(long)]
        json: bool,
    },
    /// Scan a parallel composition of threads for data races.
    RaceScan {
        /// Thread program files composed in parallel.
        #[arg(required = true)]
        programs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "hb")]
        detector: DetectorArg,
        /// Step budget per interleaving.
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[arg(long)]
        json: bool,
    },
    /// Generate a corpus of trace pairs from a config file.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the `.trc` files and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark the matchers over generated pairs from a config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// CSV output path; a `.manifest.json` sidecar goes next to it.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (timing fidelity wants 1).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::CheckTraces {
            transformed,
            original,
            nested,
            json,
            init,
            oracle,
        } => cmd_check_traces(&transformed, &original, nested, json, init.as_deref(), oracle),
        Command::CheckThreads {
            transformed,
            original,
            nested,
            domain,
            budget,
            json,
        } => cmd_check_threads(&transformed, &original, nested, &domain, budget, json),
        Command::RaceScan {
            programs,
            detector,
            max_steps,
            json,
        } => cmd_race_scan(&programs, detector, max_steps, json),
        Command::Gen { config, out } => cmd_gen(&config, &out),
        Command::Bench { config, out, jobs } => cmd_bench(&config, &out, jobs),
    };
    ExitCode::from(code)
}

fn fail(message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    EXIT_USAGE
}

fn read_to_string(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn load_trace(path: &Path) -> Result<EventTrace, u8> {
    parse_trace(&read_to_string(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn load_thread(path: &Path) -> Result<ThreadProgram, u8> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "thread".to_string());
    parse_thread(&read_to_string(path)?)
        .map(|t| t.with_name(&name))
        .map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn mode_of(nested: bool) -> SyncMode {
    if nested {
        SyncMode::Nested
    } else {
        SyncMode::NonNested
    }
}

fn cmd_check_traces(
    transformed: &Path,
    original: &Path,
    nested: bool,
    json: bool,
    init: Option<&Path>,
    oracle: bool,
) -> u8 {
    let (mut tp, mut t) = match (load_trace(transformed), load_trace(original)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(c), _) | (_, Err(c)) => return c,
    };
    if let Some(init_path) = init {
        let init_trace = match load_trace(init_path) {
            Ok(i) => i,
            Err(c) => return c,
        };
        if !init_trace.events.is_empty() {
            return fail("--init files may contain only `init` lines");
        }
        tp.init = init_trace.init.clone();
        t.init = init_trace.init;
    }
    let start = Instant::now();
    let report = match check_trace_pair(&tp, &t, mode_of(nested)) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let time_us = start.elapsed().as_micros() as u64;
    let transformations = if oracle {
        use refcheck_core::event_oracle::{oracle_match, OracleOutcome, DEFAULT_BUDGET};
        match oracle_match(&tp, &t, DEFAULT_BUDGET) {
            Ok(r) => match r.outcome {
                OracleOutcome::Found(seq) => {
                    Some(seq.iter().map(|s| s.to_string()).collect::<Vec<_>>())
                }
                OracleOutcome::NotFound => {
                    eprintln!("oracle: not-found");
                    None
                }
                OracleOutcome::BudgetExhausted => {
                    eprintln!("oracle: budget-exhausted");
                    None
                }
            },
            Err(e) => return fail(e),
        }
    } else {
        None
    };
    if json {
        let pair = format!("{} vs {}", transformed.display(), original.display());
        let mut record = PairRecord::from_report(pair, &report, time_us);
        record.transformations = transformations;
        println!("{}", record.to_json());
    } else {
        if let Some(seq) = &transformations {
            println!("oracle sequence: {}", seq.join(", "));
        }
        match report.verdict {
            Verdict::Match => println!("match ({time_us} us)"),
            Verdict::PrefixDivergenceMatch => println!("prefix-divergence-match ({time_us} us)"),
            Verdict::Mismatch => {
                let c = report.constraint.expect("mismatch carries a constraint");
                let w = report.witness.expect("mismatch carries a witness");
                let loc = w.location.as_deref().unwrap_or("-");
                println!(
                    "mismatch: {c} at index {} (location {loc}): {} ({time_us} us)",
                    w.index, w.detail
                );
            }
        }
    }
    match report.verdict {
        Verdict::Mismatch => EXIT_MISMATCH,
        _ => EXIT_OK,
    }
}

fn session_error(e: SessionError) -> u8 {
    fail(e)
}

fn cmd_check_threads(
    transformed: &Path,
    original: &Path,
    nested: bool,
    domain: &[i64],
    budget: usize,
    json: bool,
) -> u8 {
    let (tp, t) = match (load_thread(transformed), load_thread(original)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(c), _) | (_, Err(c)) => return c,
    };
    let mode = mode_of(nested);
    let session = match CheckSession::new(&tp, &t, mode) {
        Ok(s) => s,
        Err(e) => return session_error(e),
    };
    let s0s = match session.initial_states(domain, 1 << 20) {
        Ok(s) => s,
        Err(e) => return session_error(e),
    };
    let config = CheckConfig {
        domain: domain.to_vec(),
        max_traces: budget,
    };
    let start = Instant::now();
    let outcome = match nested {
        false => session.check(&s0s, &config),
        true => session.check_nested(&s0s, &config),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(CheckError::BudgetExceeded { max_traces }) => {
            eprintln!("budget of {max_traces} transformed traces exceeded");
            return EXIT_BUDGET;
        }
    };
    let time_us = start.elapsed().as_micros() as u64;
    if json {
        let mut value = serde_json::json!({
            "holds": outcome.holds,
            "traces_checked": outcome.traces_checked,
            "matched": outcome.matched,
            "diverged": outcome.diverged,
            "initial_states": s0s.len(),
            "time_us": time_us,
        });
        if let Some(cex) = &outcome.counterexample {
            value["counterexample"] = serde_json::json!({
                "constraint": cex.report.constraint.map(|c| c.label()),
                "witness": cex.report.witness.as_ref().map(WitnessRecord::from),
                "trace": cex.trace.render(&session.symbols),
            });
        }
        println!("{value}");
    } else if outcome.holds {
        println!(
            "refines: {} transformed traces covered ({} matched, {} by divergence) over {} initial states ({time_us} us)",
            outcome.traces_checked, outcome.matched, outcome.diverged, s0s.len()
        );
    } else {
        let cex = outcome.counterexample.as_ref().unwrap();
        let c = cex.report.constraint.expect("refutations carry a constraint");
        println!("does not refine: {c} violated");
        if let Some(w) = &cex.report.witness {
            println!(
                "  at index {} (location {}): {}",
                w.index,
                w.location.as_deref().unwrap_or("-"),
                w.detail
            );
        }
        print!("{}", cex.trace.render(&session.symbols));
    }
    if outcome.holds {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    }
}

fn cmd_race_scan(programs: &[PathBuf], detector: DetectorArg, max_steps: usize, json: bool) -> u8 {
    let mut threads = Vec::new();
    for path in programs {
        let t = match load_thread(path) {
            Ok(t) => t,
            Err(c) => return c,
        };
        let wf = check_well_formed(&t, SyncMode::NonNested);
        if !wf.is_ok() {
            return fail(format!(
                "{}: not well formed: {}",
                path.display(),
                wf.violations[0]
            ));
        }
        threads.push(t);
    }
    let program = match CompiledProgram::compile(&threads) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let detector = match detector {
        DetectorArg::Hb => Detector::HappensBefore,
        DetectorArg::Adjacent => Detector::Adjacent,
    };
    let witness = match program_race(&program, &[program.zero_state()], max_steps, detector) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_BUDGET;
        }
    };
    match witness {
        None => {
            if json {
                println!("{}", serde_json::json!({ "race": false }));
            } else {
                println!("race-free");
            }
            EXIT_OK
        }
        Some(w) => {
            if json {
                println!(
                    "{}",
                    serde_json::json!({
                        "race": true,
                        "location": program.symbols.loc_name(w.loc),
                        "steps": [w.first, w.second],
                    })
                );
            } else {
                println!(
                    "race on {} between steps {} and {}; witness interleaving:",
                    program.symbols.loc_name(w.loc),
                    w.first,
                    w.second
                );
                for (i, step) in w.steps.iter().enumerate() {
                    let (op, target, value) = match step.kind {
                        StepKind::Lock(l) => ("lock", program.symbols.lock_name(l), None),
                        StepKind::Unlock(l) => ("unlock", program.symbols.lock_name(l), None),
                        StepKind::Read(x, v) => ("read", program.symbols.loc_name(x), Some(v)),
                        StepKind::Write(x, v) => ("write", program.symbols.loc_name(x), Some(v)),
                    };
                    match value {
                        Some(v) => println!("  {i} {} {op} {target} {v}", step.thread),
                        None => println!("  {i} {} {op} {target} -", step.thread),
                    }
                }
            }
            EXIT_MISMATCH
        }
    }
}

fn cmd_gen(config: &Path, out: &Path) -> u8 {
    let text = match read_to_string(config) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let gen = match config::parse_gen_config(&text) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        return fail(format!("{}: {e}", out.display()));
    }
    let mut manifest = Vec::new();
    for i in 0..gen.count {
        let cfg = refcheck_core::harness::GenConfig {
            seed: gen.base.seed + i as u64,
            ..gen.base.clone()
        };
        let pair = match refcheck_core::harness::gen_pair(&cfg) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let orig_path = out.join(format!("pair_{i:04}_original.trc"));
        let trans_path = out.join(format!("pair_{i:04}_transformed.trc"));
        if let Err(e) = std::fs::write(&orig_path, pair.original.emit())
            .and_then(|_| std::fs::write(&trans_path, pair.transformed.emit()))
        {
            return fail(e);
        }
        manifest.push(serde_json::json!({
            "pair": i,
            "original": orig_path.display().to_string(),
            "transformed": trans_path.display().to_string(),
            "ground_truth": pair.ground_truth,
            "seed": cfg.seed,
            "transformations": pair.transformations.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        }));
    }
    let manifest_path = out.join("manifest.jsonl");
    let lines: Vec<String> = manifest.iter().map(|m| m.to_string()).collect();
    if let Err(e) = std::fs::write(&manifest_path, lines.join("\n") + "\n") {
        return fail(e);
    }
    println!(
        "wrote {} pairs and {}",
        gen.count,
        manifest_path.display()
    );
    EXIT_OK
}

fn cmd_bench(config: &Path, out: &Path, jobs: usize) -> u8 {
    let text = match read_to_string(config) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let bench = match config::parse_bench_config(&text) {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    let mut opts = bench.options;
    opts.jobs = jobs;
    let result = match refcheck_core::harness::run_bench(&bench.configs, &opts) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let mut csv = Vec::new();
    if refcheck_core::harness::write_csv(&result.records, &mut csv).is_err() {
        return fail("csv serialization failed");
    }
    if let Err(e) = std::fs::write(out, csv) {
        return fail(format!("{}: {e}", out.display()));
    }
    let manifest_path = out.with_extension("manifest.json");
    let mut manifest = Vec::new();
    if refcheck_core::harness::write_manifest(&bench.configs, &opts, &mut manifest).is_err() {
        return fail("manifest serialization failed");
    }
    if let Err(e) = std::fs::write(&manifest_path, manifest) {
        return fail(format!("{}: {e}", manifest_path.display()));
    }
    match serde_json::to_string_pretty(&result.summary) {
        Ok(s) => println!("{s}"),
        Err(e) => return fail(e),
    }
    eprintln!(
        "wrote {} records to {} (manifest: {})",
        result.records.len(),
        out.display(),
        manifest_path.display()
    );
    EXIT_OK
}
