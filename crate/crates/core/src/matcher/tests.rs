use super::*;
use crate::state_traces::{build_state_trace, build_transition_trace, intern_trace};
use crate::symbols::Symbols;
use crate::thread_lang::{parse_thread, SyncMode};
use crate::trace_model::parse_trace;

pub(crate) const FIG_LEFT: &str = "init x 0\ninit y 0\ninit z 0\nlock m\nwrite x 1\nwrite x 2\nunlock m\nread x 2\nread y 0\nlock m\nwrite x 0\nunlock m\n";
pub(crate) const FIG_RIGHT: &str = "init x 0\ninit y 0\ninit z 0\nlock m\nwrite x 2\nunlock m\nread y 0\nread x 2\nlock m\nwrite x 0\nread y 0\nunlock m\n";

fn built_pair(tp: &str, t: &str) -> (crate::state_traces::StateTrace, crate::state_traces::StateTrace, Symbols) {
    let tp = parse_trace(tp).unwrap();
    let t = parse_trace(t).unwrap();
    let mut symbols = Symbols::new();
    intern_trace(&tp, &mut symbols);
    intern_trace(&t, &mut symbols);
    let tp = build_state_trace(&tp, &symbols).unwrap();
    let t = build_state_trace(&t, &symbols).unwrap();
    (tp, t, symbols)
}

#[test]
fn reference_pair_matches_with_the_published_boundary_states() {
    let (tp, t, symbols) = built_pair(FIG_RIGHT, FIG_LEFT);
    // Both runs pass through {x:2,y:0,z:0} at the first unlock boundary and
    // {x:0,y:0,z:0} at the second.
    let x = symbols.loc("x").unwrap();
    for trace in [&tp, &t] {
        assert_eq!(trace.segments[0].unlock_state.get(x), 2);
        assert_eq!(trace.segments[1].unlock_state.get(x), 0);
        for loc in ["y", "z"] {
            let l = symbols.loc(loc).unwrap();
            assert_eq!(trace.segments[0].unlock_state.get(l), 0);
            assert_eq!(trace.segments[1].unlock_state.get(l), 0);
        }
    }
    let report = match_state_traces(&tp, &t, &symbols);
    assert_eq!(report.verdict, Verdict::Match, "{report:?}");
}

#[test]
fn matching_is_reflexive() {
    for src in [FIG_LEFT, FIG_RIGHT] {
        let (tp, t, symbols) = built_pair(src, src);
        assert_eq!(match_state_traces(&tp, &t, &symbols).verdict, Verdict::Match);
    }
}

const RM_ORIGINAL: &str = "lock l\nwrite x 1\nwrite y 1\nunlock l\nwrite y 2\n";
const RM_INTO: &str = "lock l\nwrite x 1\nwrite y 1\nwrite y 2\nunlock l\n";
const RM_OUT_OF: &str = "lock l\nwrite x 1\nunlock l\nwrite y 1\nwrite y 2\n";

#[test]
fn moving_a_write_into_the_section_matches() {
    // The states at the unlock differ at y, but y is overwritten by the
    // original before its next lock, so the disagreement is invisible.
    let (tp, t, symbols) = built_pair(RM_INTO, RM_ORIGINAL);
    let report = match_state_traces(&tp, &t, &symbols);
    assert_eq!(report.verdict, Verdict::Match, "{report:?}");
}

#[test]
fn moving_a_write_out_of_the_section_matches() {
    let (tp, t, symbols) = built_pair(RM_OUT_OF, RM_ORIGINAL);
    let report = match_state_traces(&tp, &t, &symbols);
    assert_eq!(report.verdict, Verdict::Match, "{report:?}");
}

#[test]
fn fresh_location_in_the_section_mismatches() {
    let (tp, t, symbols) = built_pair(
        "lock l\nwrite x 1\nwrite q 7\nunlock l\n",
        "lock l\nwrite x 1\nunlock l\n",
    );
    let report = match_state_traces(&tp, &t, &symbols);
    assert_eq!(report.verdict, Verdict::Mismatch);
    assert_eq!(report.constraint, Some(Constraint::RaceEvenW));
    assert_eq!(report.witness.unwrap().location.as_deref(), Some("q"));
}

#[test]
fn visible_value_difference_mismatches_at_the_unlock() {
    let (tp, t, symbols) = built_pair(
        "lock l\nwrite x 5\nunlock l\n",
        "lock l\nwrite x 1\nunlock l\n",
    );
    let report = match_state_traces(&tp, &t, &symbols);
    assert_eq!(report.constraint, Some(Constraint::StateUnlock));
    let w = report.witness.unwrap();
    assert_eq!(w.values, Some((5, 1)));
}

#[test]
fn transition_matching_specializes_to_state_matching_on_flat_traces() {
    let cases = [
        (FIG_RIGHT, FIG_LEFT),
        (RM_INTO, RM_ORIGINAL),
        (RM_OUT_OF, RM_ORIGINAL),
        ("lock l\nwrite x 1\nwrite q 7\nunlock l\n", "lock l\nwrite x 1\nunlock l\n"),
        ("lock l\nwrite x 5\nunlock l\n", "lock l\nwrite x 1\nunlock l\n"),
    ];
    for (tp_src, t_src) in cases {
        let tp = parse_trace(tp_src).unwrap();
        let t = parse_trace(t_src).unwrap();
        let mut symbols = Symbols::new();
        intern_trace(&tp, &mut symbols);
        intern_trace(&t, &mut symbols);
        let flat = match_state_traces(
            &build_state_trace(&tp, &symbols).unwrap(),
            &build_state_trace(&t, &symbols).unwrap(),
            &symbols,
        );
        let nested = match_transition_traces(
            &build_transition_trace(&tp, &symbols).unwrap(),
            &build_transition_trace(&t, &symbols).unwrap(),
            &symbols,
        );
        assert_eq!(flat.verdict, nested.verdict, "{tp_src} vs {t_src}");
    }
}

#[test]
fn nested_write_may_move_into_the_inner_section() {
    let t = parse_trace("lock l\nlock m\nwrite y 2\nunlock m\nwrite z 3\nunlock l\n").unwrap();
    let tp = parse_trace("lock l\nlock m\nwrite y 2\nwrite z 3\nunlock m\nunlock l\n").unwrap();
    let mut symbols = Symbols::new();
    intern_trace(&tp, &mut symbols);
    intern_trace(&t, &mut symbols);
    let report = match_transition_traces(
        &build_transition_trace(&tp, &symbols).unwrap(),
        &build_transition_trace(&t, &symbols).unwrap(),
        &symbols,
    );
    assert_eq!(report.verdict, Verdict::Match, "{report:?}");
}

#[test]
fn reordered_lock_identities_mismatch() {
    let t = parse_trace("lock l\nunlock l\nlock m\nunlock m\n").unwrap();
    let tp = parse_trace("lock m\nunlock m\nlock l\nunlock l\n").unwrap();
    let mut symbols = Symbols::new();
    intern_trace(&tp, &mut symbols);
    intern_trace(&t, &mut symbols);
    let report = match_transition_traces(
        &build_transition_trace(&tp, &symbols).unwrap(),
        &build_transition_trace(&t, &symbols).unwrap(),
        &symbols,
    );
    assert_eq!(report.constraint, Some(Constraint::SameLocks));
    assert_eq!(report.witness.unwrap().index, 0);
}

// Thread sources for the program-level decision.
const PROG_RM_ORIGINAL: &str = "lock(l); x = 1; y = 1; unlock(l); y = 2;";
const PROG_RM_INTO: &str = "lock(l); x = 1; y = 1; y = 2; unlock(l);";
const PROG_RM_OUT_OF: &str = "lock(l); x = 1; unlock(l); y = 1; y = 2;";

fn session(tp: &str, t: &str, mode: SyncMode) -> CheckSession {
    CheckSession::new(&parse_thread(tp).unwrap(), &parse_thread(t).unwrap(), mode).unwrap()
}

fn run_check(tp: &str, t: &str) -> CheckOutcome {
    let s = session(tp, t, SyncMode::NonNested);
    let config = CheckConfig::default();
    let s0s = s.initial_states(&config.domain, 100_000).unwrap();
    s.check(&s0s, &config).unwrap()
}

fn run_check_nested(tp: &str, t: &str) -> CheckOutcome {
    let s = session(tp, t, SyncMode::Nested);
    let config = CheckConfig::default();
    let s0s = s.initial_states(&config.domain, 100_000).unwrap();
    s.check_nested(&s0s, &config).unwrap()
}

#[test]
fn roach_motel_reorderings_check_at_the_program_level() {
    let into = run_check(PROG_RM_INTO, PROG_RM_ORIGINAL);
    assert!(into.holds, "{:?}", into.counterexample.map(|c| c.report));
    let out_of = run_check(PROG_RM_OUT_OF, PROG_RM_ORIGINAL);
    assert!(out_of.holds, "{:?}", out_of.counterexample.map(|c| c.report));
}

#[test]
fn check_is_reflexive() {
    for src in [
        PROG_RM_ORIGINAL,
        "local a;\nlock(l); a = x; unlock(l); lock(l); x = a + 1; unlock(l);",
        "",
    ] {
        let outcome = run_check(src, src);
        assert!(outcome.holds, "{src}");
    }
}

#[test]
fn fresh_write_refutes_check_with_a_race_witness() {
    let outcome = run_check("lock(l); x = 1; q = 5; unlock(l);", "lock(l); x = 1; unlock(l);");
    assert!(!outcome.holds);
    let cex = outcome.counterexample.unwrap();
    assert_eq!(cex.report.constraint, Some(Constraint::RaceEvenW));
    assert_eq!(cex.report.witness.unwrap().location.as_deref(), Some("q"));
}

#[test]
fn dropping_a_trailing_section_refutes_check() {
    // A shorter thread is not a refinement: contexts can rely on the
    // dropped section's synchronization.
    let outcome = run_check(
        "lock(l); x = 1; unlock(l);",
        "lock(l); x = 1; unlock(l); lock(l); x = 2; unlock(l);",
    );
    assert!(!outcome.holds);
    assert_eq!(
        outcome.counterexample.unwrap().report.constraint,
        Some(Constraint::Length)
    );
}

#[test]
fn divergence_covers_contexts_that_would_race_with_the_original() {
    // The original reads y between its sections; the transformed thread does
    // not. Traces where y changes at the second lock are covered by the
    // divergence clause rather than matched.
    let t = "local a;\nlock(l); x = 1; unlock(l); a = y; lock(l); x = 2; unlock(l);";
    let tp = "lock(l); x = 1; unlock(l); lock(l); x = 2; unlock(l);";
    let outcome = run_check(tp, t);
    assert!(outcome.holds, "{:?}", outcome.counterexample.map(|c| c.report));
    assert!(outcome.diverged > 0);
    assert!(outcome.matched > 0);
}

#[test]
fn check_nested_agrees_with_check_on_flat_threads() {
    let cases = [
        (PROG_RM_INTO, PROG_RM_ORIGINAL, true),
        (PROG_RM_OUT_OF, PROG_RM_ORIGINAL, true),
        ("lock(l); x = 1; q = 5; unlock(l);", "lock(l); x = 1; unlock(l);", false),
        (PROG_RM_ORIGINAL, PROG_RM_ORIGINAL, true),
    ];
    for (tp, t, expected) in cases {
        let flat = run_check(tp, t);
        let nested = run_check_nested(tp, t);
        assert_eq!(flat.holds, expected, "flat {tp}");
        assert_eq!(nested.holds, expected, "nested {tp}");
    }
}

#[test]
fn check_nested_validates_nested_reorderings() {
    let t = "lock(l); lock(m); y = 2; unlock(m); z = 3; unlock(l);";
    let tp = "lock(l); lock(m); y = 2; z = 3; unlock(m); unlock(l);";
    let outcome = run_check_nested(tp, t);
    assert!(outcome.holds, "{:?}", outcome.counterexample.map(|c| c.report));
    // The reverse direction moves the write out of the inner section: a
    // context protecting z with m alone could then race with it.
    let outcome = run_check_nested(t, tp);
    assert!(!outcome.holds);
    assert_eq!(
        outcome.counterexample.unwrap().report.constraint,
        Some(Constraint::RaceOddW)
    );
}

#[test]
fn trace_pair_accepts_the_reference_pair() {
    let tp = parse_trace(FIG_RIGHT).unwrap();
    let t = parse_trace(FIG_LEFT).unwrap();
    let report = check_trace_pair(&tp, &t, SyncMode::NonNested).unwrap();
    assert_eq!(report.verdict, Verdict::Match, "{report:?}");
    assert_eq!(
        report.degenerate,
        vec![Constraint::StateLock, Constraint::StateLockStability]
    );
}

#[test]
fn trace_pair_accepts_identical_traces() {
    let t = parse_trace(FIG_LEFT).unwrap();
    let report = check_trace_pair(&t, &t, SyncMode::NonNested).unwrap();
    assert_eq!(report.verdict, Verdict::Match);
}

#[test]
fn trace_pair_rejects_a_dropped_final_write() {
    let t = parse_trace(FIG_LEFT).unwrap();
    // The transformed trace lost `write x 0` in the second section.
    let tp = parse_trace(
        "init x 0\ninit y 0\ninit z 0\nlock m\nwrite x 2\nunlock m\nread y 0\nread x 2\nlock m\nread y 0\nunlock m\n",
    )
    .unwrap();
    let report = check_trace_pair(&tp, &t, SyncMode::NonNested).unwrap();
    assert_eq!(report.verdict, Verdict::Mismatch);
    assert_eq!(report.constraint, Some(Constraint::StateUnlock));
    let w = report.witness.unwrap();
    assert_eq!(w.index, 1);
    assert_eq!(w.location.as_deref(), Some("x"));
    assert_eq!(w.values, Some((2, 0)));
}

#[test]
fn trace_pair_requires_equal_initial_states() {
    let t = parse_trace("init x 1\nlock l\nread x 1\nunlock l\n").unwrap();
    let tp = parse_trace("lock l\nunlock l\n").unwrap();
    let err = check_trace_pair(&tp, &t, SyncMode::NonNested).unwrap_err();
    assert!(matches!(err, TracePairError::InitMismatch { ref loc, .. } if loc == "x"));
}

#[test]
fn trace_pair_nested_mode_handles_forward_windows() {
    let t = parse_trace("lock l\nlock m\nwrite y 2\nunlock m\nwrite z 3\nunlock l\n").unwrap();
    let tp = parse_trace("lock l\nlock m\nwrite y 2\nwrite z 3\nunlock m\nunlock l\n").unwrap();
    let report = check_trace_pair(&tp, &t, SyncMode::Nested).unwrap();
    assert_eq!(report.verdict, Verdict::Match, "{report:?}");
    // The move in the other direction would let z race after `unlock m`.
    let report = check_trace_pair(&t, &tp, SyncMode::Nested).unwrap();
    assert_eq!(report.verdict, Verdict::Mismatch);
    assert_eq!(report.constraint, Some(Constraint::RaceOddW));
}

#[test]
fn trace_pair_agrees_with_the_batch_matcher() {
    let cases = [
        (FIG_RIGHT, FIG_LEFT),
        (RM_INTO, RM_ORIGINAL),
        (RM_OUT_OF, RM_ORIGINAL),
        ("lock l\nwrite x 5\nunlock l\n", "lock l\nwrite x 1\nunlock l\n"),
        ("lock l\nread q 0\nunlock l\n", "lock l\nunlock l\n"),
    ];
    for (tp_src, t_src) in cases {
        let tp = parse_trace(tp_src).unwrap();
        let t = parse_trace(t_src).unwrap();
        let mut symbols = Symbols::new();
        intern_trace(&tp, &mut symbols);
        intern_trace(&t, &mut symbols);
        let batch = match_state_traces(
            &build_state_trace(&tp, &symbols).unwrap(),
            &build_state_trace(&t, &symbols).unwrap(),
            &symbols,
        );
        let pair = check_trace_pair(&tp, &t, SyncMode::NonNested).unwrap();
        assert_eq!(pair.verdict, batch.verdict, "{tp_src}");
        assert_eq!(pair.constraint, batch.constraint, "{tp_src}");
    }
}
