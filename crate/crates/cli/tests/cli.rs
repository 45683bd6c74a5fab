//! Exit-code and output contract of the `refcheck` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_refcheck"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = bin();
    for a in args {
        cmd.arg(a.as_ref());
    }
    cmd.output().expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn check_traces_match_is_exit_zero() {
    let out = run(&[
        &"check-traces",
        &data("fig_trans.trc"),
        &data("fig_orig.trc"),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("match"), "{stdout}");
}

#[test]
fn check_traces_against_itself_is_exit_zero() {
    let out = run(&[&"check-traces", &data("fig_orig.trc"), &data("fig_orig.trc")]);
    assert_eq!(code(&out), 0);
}

#[test]
fn corrupted_trace_is_exit_one_with_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    // Drop the final `write x 0` from the transformed trace.
    let text = std::fs::read_to_string(data("fig_trans.trc")).unwrap();
    let corrupted: String = text
        .lines()
        .filter(|l| *l != "write x 0")
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.path().join("corrupted.trc");
    std::fs::write(&path, corrupted).unwrap();

    let out = run(&[&"check-traces", &path, &data("fig_orig.trc"), &"--json"]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let record: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(record["verdict"], "mismatch");
    assert_eq!(record["constraint"], "state-unlock");
    assert_eq!(record["witness"]["location"], "x");
}

#[test]
fn malformed_input_is_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.trc");
    std::fs::write(&path, "lock m 3\n").unwrap();
    let out = run(&[&"check-traces", &path, &data("fig_orig.trc")]);
    assert_eq!(code(&out), 2);
    assert!(!String::from_utf8(out.stderr).unwrap().is_empty());
}

#[test]
fn init_override_applies_to_both_traces() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("init.trc");
    std::fs::write(&init, "init x 1\ninit y 0\ninit z 0\n").unwrap();
    // With x starting at 1, the original's `read x 2` after `write x 2` is
    // still coherent, so the pair still matches.
    let out = run(&[
        &"check-traces",
        &data("fig_trans.trc"),
        &data("fig_orig.trc"),
        &"--init",
        &init,
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
}

#[test]
fn nested_mode_checks_transition_traces() {
    let dir = tempfile::tempdir().unwrap();
    let orig = dir.path().join("orig.trc");
    let trans = dir.path().join("trans.trc");
    std::fs::write(&orig, "lock l\nlock m\nwrite y 2\nunlock m\nwrite z 3\nunlock l\n").unwrap();
    std::fs::write(&trans, "lock l\nlock m\nwrite y 2\nwrite z 3\nunlock m\nunlock l\n").unwrap();
    let out = run(&[&"check-traces", &trans, &orig, &"--nested"]);
    assert_eq!(code(&out), 0, "{out:?}");
    // Without --nested the traces are rejected as input errors.
    let out = run(&[&"check-traces", &trans, &orig]);
    assert_eq!(code(&out), 2);
}

#[test]
fn check_threads_accepts_the_reference_transformation() {
    let out = run(&[
        &"check-threads",
        &data("thread_trans.thr"),
        &data("thread_orig.thr"),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("refines"), "{stdout}");
}

#[test]
fn check_threads_rejects_a_fresh_write() {
    let dir = tempfile::tempdir().unwrap();
    let trans = dir.path().join("trans.thr");
    std::fs::write(&trans, "lock(l); x = 1; q = 5; unlock(l);\n").unwrap();
    let orig = dir.path().join("orig.thr");
    std::fs::write(&orig, "lock(l); x = 1; unlock(l);\n").unwrap();
    let out = run(&[&"check-threads", &trans, &orig, &"--json"]);
    assert_eq!(code(&out), 1);
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stdout).unwrap().trim()).unwrap();
    assert_eq!(record["holds"], false);
    assert_eq!(record["counterexample"]["constraint"], "race-even-W");
}

#[test]
fn check_threads_budget_is_exit_three() {
    let out = run(&[
        &"check-threads",
        &data("rm_into.thr"),
        &data("rm_original.thr"),
        &"--budget",
        &"1",
    ]);
    assert_eq!(code(&out), 3, "{out:?}");
}

#[test]
fn race_scan_is_exit_zero_on_the_reference_composition() {
    for detector in ["hb", "adjacent"] {
        let out = run(&[
            &"race-scan",
            &data("thread_orig.thr"),
            &data("context.thr"),
            &"--detector",
            &detector,
        ]);
        assert_eq!(code(&out), 0, "{detector}: {out:?}");
    }
}

#[test]
fn race_scan_prints_a_witness_interleaving() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.thr");
    let b = dir.path().join("b.thr");
    std::fs::write(&a, "lock(l); unlock(l); x = 1;\n").unwrap();
    std::fs::write(&b, "lock(l); unlock(l); x = 2;\n").unwrap();
    for detector in ["hb", "adjacent"] {
        let out = run(&[&"race-scan", &a, &b, &"--detector", &detector]);
        assert_eq!(code(&out), 1, "{detector}");
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("race on x"), "{stdout}");
        assert!(stdout.contains("write x"), "witness printed: {stdout}");
    }
}

#[test]
fn gen_writes_pairs_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gen.conf");
    std::fs::write(
        &config,
        "seed = 9\ncount = 3\ntrace_len = 40..60\nlock_count = 2..3\n",
    )
    .unwrap();
    let out_dir = dir.path().join("pairs");
    let out = run(&[&"gen", &"--config", &config, &"--out", &out_dir]);
    assert_eq!(code(&out), 0, "{out:?}");
    for i in 0..3 {
        let orig = out_dir.join(format!("pair_{i:04}_original.trc"));
        let trans = out_dir.join(format!("pair_{i:04}_transformed.trc"));
        assert!(orig.exists() && trans.exists());
        // The generated pair checks as a match end to end.
        let check = run(&[&"check-traces", &trans, &orig]);
        assert_eq!(code(&check), 0);
    }
    assert!(out_dir.join("manifest.jsonl").exists());
}

#[test]
fn bench_writes_csv_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.conf");
    std::fs::write(
        &config,
        "seed = 4\ncount = 6\ntrace_len = 60..90\nlock_count = 2..4\noracle = true\nrepetitions = 1\n",
    )
    .unwrap();
    let csv_path = dir.path().join("bench.csv");
    let out = run(&[&"bench", &"--config", &config, &"--out", &csv_path]);
    assert_eq!(code(&out), 0, "{out:?}");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("bin,len,locks,state_us,oracle_us,verdict"));
    assert_eq!(csv.lines().count(), 7);
    assert!(dir.path().join("bench.manifest.json").exists());
    // Summary on stdout parses as JSON with the bin statistics.
    let summary: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(summary["bins"][0]["median_speedup"].is_number());
}
