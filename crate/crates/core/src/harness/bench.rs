//! Timing harness for the two matchers.
//!
//! Pairs are generated per config, checked by the state matcher (and
//! optionally the event oracle) and timed with a monotonic clock, three runs
//! per pair with the median reported. Summaries carry per-bin means, 20th and
//! 80th percentiles, medians, speedups and a least-squares fit of time
//! against trace length.

use super::gen::{gen_pair, GenConfig, GenError, GroundTruth};
use crate::event_oracle::{oracle_match, OracleOutcome, DEFAULT_BUDGET};
use crate::matcher::{check_trace_pair, Verdict};
use crate::thread_lang::SyncMode;
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub pair_id: usize,
    pub bin: usize,
    pub trace_len: usize,
    pub lock_count: usize,
    pub state_us: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_us: Option<u64>,
    pub state_verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_verdict: Option<&'static str>,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Run the event oracle on every pair as well.
    pub run_oracle: bool,
    pub oracle_budget: usize,
    /// Timed runs per pair for the state matcher (median reported).
    pub repetitions: usize,
    /// Worker threads; timing fidelity wants 1 (the default).
    pub jobs: usize,
    pub mode: SyncMode,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            run_oracle: false,
            oracle_budget: DEFAULT_BUDGET,
            repetitions: 3,
            jobs: 1,
            mode: SyncMode::NonNested,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BinStats {
    pub bin: usize,
    pub pairs: usize,
    pub mean_len: f64,
    pub mean_state_us: f64,
    pub p20_state_us: u64,
    pub p80_state_us: u64,
    pub median_state_us: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_oracle_us: Option<u64>,
    /// Median of per-pair oracle/state time ratios.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_speedup: Option<f64>,
}

/// Least-squares line fit with its coefficient of determination.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LinFit {
        slope,
        intercept,
        r2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub bins: Vec<BinStats>,
    /// Fit of per-bin mean state time against per-bin mean length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_state_time: Option<LinFit>,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub records: Vec<BenchRecord>,
    pub summary: BenchSummary,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Gen(#[from] GenError),
    #[error("pair {pair_id}: {message}")]
    Check { pair_id: usize, message: String },
}

fn median_u64(sorted: &mut [u64]) -> u64 {
    sorted.sort_unstable();
    sorted[sorted.len() / 2]
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn bench_one(
    pair_id: usize,
    bin: usize,
    cfg: &GenConfig,
    opts: &BenchOptions,
) -> Result<BenchRecord, BenchError> {
    let pair = gen_pair(cfg)?;
    let mut times = Vec::with_capacity(opts.repetitions);
    let mut verdict = Verdict::Match;
    for _ in 0..opts.repetitions.max(1) {
        let start = Instant::now();
        let report = check_trace_pair(&pair.transformed, &pair.original, opts.mode)
            .map_err(|e| BenchError::Check {
                pair_id,
                message: e.to_string(),
            })?;
        times.push(start.elapsed().as_micros() as u64);
        verdict = report.verdict;
    }
    let state_us = median_u64(&mut times);

    let (oracle_us, oracle_verdict) = if opts.run_oracle {
        let start = Instant::now();
        let report = oracle_match(&pair.transformed, &pair.original, opts.oracle_budget)
            .map_err(|e| BenchError::Check {
                pair_id,
                message: e.to_string(),
            })?;
        let us = start.elapsed().as_micros() as u64;
        let verdict = match report.outcome {
            OracleOutcome::Found(_) => "found",
            OracleOutcome::NotFound => "not-found",
            OracleOutcome::BudgetExhausted => "budget-exhausted",
        };
        (Some(us), Some(verdict))
    } else {
        (None, None)
    };

    Ok(BenchRecord {
        pair_id,
        bin,
        trace_len: pair.original.events.len(),
        lock_count: pair.original.lock_event_count(),
        state_us,
        oracle_us,
        state_verdict: crate::report::verdict_str(verdict),
        oracle_verdict,
        ground_truth: pair.ground_truth,
    })
}

/// Runs every `(bin, config)` pair and summarizes per bin. With `jobs > 1`
/// pairs run on worker threads; use that for verdict-oriented sweeps, not
/// for timing.
pub fn run_bench(cfgs: &[(usize, GenConfig)], opts: &BenchOptions) -> Result<BenchResult, BenchError> {
    let mut records: Vec<BenchRecord> = Vec::with_capacity(cfgs.len());
    if opts.jobs <= 1 {
        for (pair_id, (bin, cfg)) in cfgs.iter().enumerate() {
            records.push(bench_one(pair_id, *bin, cfg, opts)?);
        }
    } else {
        let chunk = cfgs.len().div_ceil(opts.jobs);
        let results: Vec<Result<Vec<BenchRecord>, BenchError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = cfgs
                .chunks(chunk.max(1))
                .enumerate()
                .map(|(c, slice)| {
                    let base = c * chunk.max(1);
                    scope.spawn(move || {
                        slice
                            .iter()
                            .enumerate()
                            .map(|(i, (bin, cfg))| bench_one(base + i, *bin, cfg, opts))
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for r in results {
            records.extend(r?);
        }
        records.sort_by_key(|r| r.pair_id);
    }
    let summary = summarize(&records);
    Ok(BenchResult { records, summary })
}

pub fn summarize(records: &[BenchRecord]) -> BenchSummary {
    let mut bins: Vec<usize> = records.iter().map(|r| r.bin).collect();
    bins.sort_unstable();
    bins.dedup();
    let mut stats = Vec::new();
    for bin in bins {
        let of_bin: Vec<&BenchRecord> = records.iter().filter(|r| r.bin == bin).collect();
        let mut state: Vec<u64> = of_bin.iter().map(|r| r.state_us).collect();
        state.sort_unstable();
        let mean_len =
            of_bin.iter().map(|r| r.trace_len as f64).sum::<f64>() / of_bin.len() as f64;
        let mean_state_us =
            of_bin.iter().map(|r| r.state_us as f64).sum::<f64>() / of_bin.len() as f64;
        let mut oracle: Vec<u64> = of_bin.iter().filter_map(|r| r.oracle_us).collect();
        oracle.sort_unstable();
        let mut speedups: Vec<f64> = of_bin
            .iter()
            .filter_map(|r| {
                r.oracle_us
                    .map(|o| o as f64 / (r.state_us.max(1)) as f64)
            })
            .collect();
        speedups.sort_by(|a, b| a.total_cmp(b));
        stats.push(BinStats {
            bin,
            pairs: of_bin.len(),
            mean_len,
            mean_state_us,
            p20_state_us: percentile(&state, 0.2),
            p80_state_us: percentile(&state, 0.8),
            median_state_us: state[state.len() / 2],
            median_oracle_us: (!oracle.is_empty()).then(|| oracle[oracle.len() / 2]),
            median_speedup: (!speedups.is_empty()).then(|| speedups[speedups.len() / 2]),
        });
    }
    let points: Vec<(f64, f64)> = stats
        .iter()
        .map(|b| (b.mean_len, b.mean_state_us))
        .collect();
    BenchSummary {
        fit_state_time: linear_fit(&points),
        bins: stats,
    }
}

/// CSV rows for plotting: `bin,len,locks,state_us,oracle_us,verdict`.
pub fn write_csv(records: &[BenchRecord], mut out: impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "bin,len,locks,state_us,oracle_us,verdict")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.bin,
            r.trace_len,
            r.lock_count,
            r.state_us,
            r.oracle_us.map(|v| v.to_string()).unwrap_or_default(),
            r.state_verdict,
        )?;
    }
    Ok(())
}

/// Sidecar manifest echoing the generating configs and options.
pub fn write_manifest(
    cfgs: &[(usize, GenConfig)],
    opts: &BenchOptions,
    mut out: impl std::io::Write,
) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        configs: Vec<ManifestEntry<'a>>,
        run_oracle: bool,
        oracle_budget: usize,
        repetitions: usize,
        jobs: usize,
    }
    #[derive(Serialize)]
    struct ManifestEntry<'a> {
        bin: usize,
        #[serde(flatten)]
        config: &'a GenConfig,
    }
    let manifest = Manifest {
        configs: cfgs
            .iter()
            .map(|(bin, config)| ManifestEntry { bin: *bin, config })
            .collect(),
        run_oracle: opts.run_oracle,
        oracle_budget: opts.oracle_budget,
        repetitions: opts.repetitions,
        jobs: opts.jobs,
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&manifest)?)
}

/// Standard length-sweep configs: bin `i` holds `per_bin` pairs with lengths
/// in `[250 * i, 250 * (i + 1)]`, up to `max_len`.
pub fn length_sweep(seed: u64, per_bin: usize, max_len: usize) -> Vec<(usize, GenConfig)> {
    let mut cfgs = Vec::new();
    let mut pair_seed = seed;
    for bin in 1..max_len / 250 {
        for _ in 0..per_bin {
            cfgs.push((
                bin,
                GenConfig {
                    seed: pair_seed,
                    trace_len: (250 * bin, 250 * (bin + 1)),
                    lock_count: (2, 8),
                    location_count: 8,
                    ..GenConfig::default()
                },
            ));
            pair_seed += 1;
        }
    }
    cfgs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_list_gives_an_empty_summary() {
        let result = run_bench(&[], &BenchOptions::default()).unwrap();
        assert!(result.records.is_empty());
        assert!(result.summary.bins.is_empty());
        assert!(result.summary.fit_state_time.is_none());
    }

    #[test]
    fn records_and_csv_have_one_row_per_pair() {
        let cfgs: Vec<(usize, GenConfig)> = (0..4)
            .map(|i| {
                (
                    i / 2,
                    GenConfig {
                        seed: i as u64,
                        ..GenConfig::default()
                    },
                )
            })
            .collect();
        let result = run_bench(&cfgs, &BenchOptions::default()).unwrap();
        assert_eq!(result.records.len(), 4);
        let mut csv = Vec::new();
        write_csv(&result.records, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("bin,len,locks,state_us,oracle_us,verdict"));
    }

    #[test]
    fn linear_fit_recovers_a_line() {
        let points: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64, 3.0 * i as f64 + 2.0)).collect();
        let fit = linear_fit(&points).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-9);
        assert!((fit.intercept - 2.0).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parallel_verdicts_agree_with_sequential() {
        let cfgs: Vec<(usize, GenConfig)> = (0..6)
            .map(|i| {
                (
                    0,
                    GenConfig {
                        seed: 100 + i as u64,
                        ..GenConfig::default()
                    },
                )
            })
            .collect();
        let seq = run_bench(&cfgs, &BenchOptions::default()).unwrap();
        let par = run_bench(
            &cfgs,
            &BenchOptions {
                jobs: 3,
                ..BenchOptions::default()
            },
        )
        .unwrap();
        let verdicts = |r: &BenchResult| -> Vec<&'static str> {
            r.records.iter().map(|x| x.state_verdict).collect()
        };
        assert_eq!(verdicts(&seq), verdicts(&par));
    }
}
