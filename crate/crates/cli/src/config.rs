//! Key=value config files for `gen` and `bench`.
//!
//! Lines are `key = value` with `#` comments. Ranges are written `lo..hi`
//! (inclusive), lists comma-separated.

use refcheck_core::event_oracle::DEFAULT_BUDGET;
use refcheck_core::harness::{BenchOptions, BugKind, GenConfig, TransformMix};
use std::collections::BTreeMap;

pub struct GenFile {
    pub base: GenConfig,
    pub count: usize,
}

pub struct BenchFile {
    pub configs: Vec<(usize, GenConfig)>,
    pub options: BenchOptions,
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", lineno + 1));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_range(value: &str) -> Result<(usize, usize), String> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo = lo.trim().parse().map_err(|_| format!("bad range '{value}'"))?;
        let hi = hi.trim().parse().map_err(|_| format!("bad range '{value}'"))?;
        return Ok((lo, hi));
    }
    let v: usize = value.trim().parse().map_err(|_| format!("bad range '{value}'"))?;
    Ok((v, v))
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| format!("bad list '{value}'")))
        .collect()
}

fn parse_usize(map: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize, String> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| format!("bad {key} '{v}'")),
    }
}

fn parse_bool(map: &BTreeMap<String, String>, key: &str, default: bool) -> Result<bool, String> {
    match map.get(key).map(|s| s.as_str()) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(v) => Err(format!("bad {key} '{v}'")),
    }
}

fn base_config(map: &BTreeMap<String, String>) -> Result<GenConfig, String> {
    let mut cfg = GenConfig::default();
    if let Some(v) = map.get("seed") {
        cfg.seed = v.parse().map_err(|_| format!("bad seed '{v}'"))?;
    }
    if let Some(v) = map.get("trace_len") {
        cfg.trace_len = parse_range(v)?;
    }
    if let Some(v) = map.get("lock_count") {
        cfg.lock_count = parse_range(v)?;
    }
    cfg.location_count = parse_usize(map, "location_count", cfg.location_count)?;
    if let Some(v) = map.get("value_domain") {
        cfg.value_domain = parse_list(v)?;
    }
    if let Some(v) = map.get("transform_count") {
        let r = parse_range(v)?;
        cfg.transform_count = r;
    }
    if let Some(v) = map.get("mix") {
        let parts: Vec<f64> = parse_list(v)?;
        if parts.len() != 4 {
            return Err("mix takes four weights: reorder, elim-write, elim-read, intro-read".into());
        }
        cfg.transform_mix = TransformMix {
            reorder: parts[0],
            elim_write: parts[1],
            elim_read: parts[2],
            intro_read: parts[3],
        };
    }
    cfg.bug = match map.get("bug").map(|s| s.as_str()) {
        None | Some("off") => None,
        Some("value-corruption") => Some(BugKind::ValueCorruption),
        Some("fresh-location-access") => Some(BugKind::FreshLocationAccess),
        Some("lock-sequence-edit") => Some(BugKind::LockSequenceEdit),
        Some(v) => return Err(format!("bad bug kind '{v}'")),
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn parse_gen_config(text: &str) -> Result<GenFile, String> {
    let map = parse_kv(text)?;
    Ok(GenFile {
        base: base_config(&map)?,
        count: parse_usize(&map, "count", 10)?,
    })
}

fn options(map: &BTreeMap<String, String>) -> Result<BenchOptions, String> {
    Ok(BenchOptions {
        run_oracle: parse_bool(map, "oracle", false)?,
        oracle_budget: parse_usize(map, "oracle_budget", DEFAULT_BUDGET)?,
        repetitions: parse_usize(map, "repetitions", 3)?,
        ..BenchOptions::default()
    })
}

pub fn parse_bench_config(text: &str) -> Result<BenchFile, String> {
    let map = parse_kv(text)?;
    let options = options(&map)?;
    let seed = parse_usize(&map, "seed", 1)? as u64;
    let per_bin = parse_usize(&map, "per_bin", 100)?;
    let configs = match map.get("sweep").map(|s| s.as_str()) {
        Some("length") => {
            let max_len = parse_usize(&map, "max_len", 4000)?;
            refcheck_core::harness::length_sweep(seed, per_bin, max_len)
        }
        Some("locks") => {
            let base = base_config(&map)?;
            let bins: Vec<usize> = match map.get("lock_bins") {
                Some(v) => parse_list(v)?,
                None => vec![10, 25, 50, 100, 200],
            };
            let mut cfgs = Vec::new();
            let mut pair_seed = seed;
            for &locks in &bins {
                for _ in 0..per_bin {
                    cfgs.push((
                        locks,
                        GenConfig {
                            seed: pair_seed,
                            lock_count: (locks, locks),
                            ..base.clone()
                        },
                    ));
                    pair_seed += 1;
                }
            }
            cfgs
        }
        None | Some("none") => {
            let base = base_config(&map)?;
            let count = parse_usize(&map, "count", per_bin)?;
            (0..count)
                .map(|i| {
                    (
                        0,
                        GenConfig {
                            seed: seed + i as u64,
                            ..base.clone()
                        },
                    )
                })
                .collect()
        }
        Some(v) => return Err(format!("bad sweep '{v}' (length, locks or none)")),
    };
    Ok(BenchFile { configs, options })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_config_round_trip() {
        let text = "seed = 3\ncount = 5\ntrace_len = 50..80\nlock_count = 2..3\nbug = lock-sequence-edit\n";
        let gen = parse_gen_config(text).unwrap();
        assert_eq!(gen.count, 5);
        assert_eq!(gen.base.seed, 3);
        assert_eq!(gen.base.trace_len, (50, 80));
        assert_eq!(gen.base.bug, Some(BugKind::LockSequenceEdit));
    }

    #[test]
    fn bench_length_sweep_builds_bins() {
        let bench = parse_bench_config("sweep = length\nmax_len = 1000\nper_bin = 2\n").unwrap();
        assert_eq!(bench.configs.len(), 6); // bins 1..=3, 2 pairs each
        assert!(bench.configs.iter().any(|(bin, _)| *bin == 3));
    }

    #[test]
    fn bad_keys_are_reported() {
        assert!(parse_bench_config("sweep = sideways\n").is_err());
        assert!(parse_gen_config("bug = nonsense\n").is_err());
    }
}
