//! Random trace-pair generation.
//!
//! Pairs are built at the event level so lengths in the thousands stay cheap:
//! a random well-formed base trace, then a sequence of valid transformations
//! (ground truth: match), optionally followed by one injected bug (ground
//! truth: mismatch). Generation is deterministic per seed.

use crate::event_oracle::Transformation;
use crate::trace_model::{Event, EventTrace};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Relative frequency of each transformation kind.
#[derive(Debug, Clone, Serialize)]
pub struct TransformMix {
    pub reorder: f64,
    pub elim_write: f64,
    pub elim_read: f64,
    pub intro_read: f64,
}

impl Default for TransformMix {
    fn default() -> Self {
        TransformMix {
            reorder: 0.4,
            elim_write: 0.2,
            elim_read: 0.2,
            intro_read: 0.2,
        }
    }
}

impl TransformMix {
    fn sum(&self) -> f64 {
        self.reorder + self.elim_write + self.elim_read + self.intro_read
    }
}

/// A deliberate defect injected into the transformed trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BugKind {
    /// Corrupt a write whose value is visible at an unlock boundary.
    ValueCorruption,
    /// Access a location the original trace never touches.
    FreshLocationAccess,
    /// Retarget one section to a different lock.
    LockSequenceEdit,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenConfig {
    pub seed: u64,
    /// Inclusive range of total event counts.
    pub trace_len: (usize, usize),
    /// Inclusive range of lock-acquisition counts (sections).
    pub lock_count: (usize, usize),
    pub location_count: usize,
    pub value_domain: Vec<i64>,
    pub transform_mix: TransformMix,
    /// Inclusive range of transformations to apply.
    pub transform_count: (usize, usize),
    pub bug: Option<BugKind>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            trace_len: (100, 200),
            lock_count: (2, 6),
            location_count: 6,
            value_domain: vec![0, 1, 2],
            transform_mix: TransformMix::default(),
            transform_count: (1, 4),
            bug: None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenError {
    #[error("transformation mix must sum to 1, got {0}")]
    BadMix(f64),
    #[error("{0}")]
    BadRange(&'static str),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let sum = self.transform_mix.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GenError::BadMix(sum));
        }
        if self.trace_len.0 > self.trace_len.1 || self.lock_count.0 > self.lock_count.1 {
            return Err(GenError::BadRange("ranges must be nonempty"));
        }
        if self.lock_count.0 == 0 {
            return Err(GenError::BadRange("traces need at least one section"));
        }
        if self.trace_len.0 < 2 * self.lock_count.1 {
            return Err(GenError::BadRange(
                "trace length must cover the sync events",
            ));
        }
        if self.location_count == 0 || self.value_domain.is_empty() {
            return Err(GenError::BadRange("locations and values must be nonempty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GroundTruth {
    Match,
    Mismatch,
}

#[derive(Debug, Clone)]
pub struct GeneratedPair {
    pub original: EventTrace,
    pub transformed: EventTrace,
    pub ground_truth: GroundTruth,
    pub transformations: Vec<Transformation>,
    pub bug: Option<BugKind>,
}

/// Generates one pair per the config. Same seed, same bytes.
pub fn gen_pair(cfg: &GenConfig) -> Result<GeneratedPair, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let original = gen_base_trace(cfg, &mut rng);
    let mut transformed = original.clone();

    let n = rng.gen_range(cfg.transform_count.0..=cfg.transform_count.1);
    let mut transformations = Vec::new();
    for _ in 0..n {
        if let Some(t) = random_transformation(&transformed, cfg, &mut rng) {
            transformed = t.apply(&transformed).expect("selected instance applies");
            transformations.push(t);
        }
    }

    let mut ground_truth = GroundTruth::Match;
    let mut bug = None;
    if let Some(kind) = cfg.bug {
        let applied = inject_bug(&original, &mut transformed, kind, &mut rng);
        bug = Some(applied);
        ground_truth = GroundTruth::Mismatch;
    }
    Ok(GeneratedPair {
        original,
        transformed,
        ground_truth,
        transformations,
        bug,
    })
}

fn gen_base_trace(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> EventTrace {
    let sections = rng.gen_range(cfg.lock_count.0..=cfg.lock_count.1);
    let target_len = rng.gen_range(cfg.trace_len.0.max(2 * sections)..=cfg.trace_len.1);
    let mem_events = target_len - 2 * sections;
    // Slot 2k is section k's interior, slot 2k+1 the gap after it.
    let mut slot_sizes = vec![0usize; 2 * sections];
    for _ in 0..mem_events {
        let slot = rng.gen_range(0..slot_sizes.len());
        slot_sizes[slot] += 1;
    }
    let lock_pool: Vec<String> = (0..sections.min(8)).map(|i| format!("l{i}")).collect();
    let locs: Vec<String> = (0..cfg.location_count).map(|i| format!("x{i}")).collect();

    let mut state: BTreeMap<String, i64> = BTreeMap::new();
    let mut events = Vec::with_capacity(target_len);
    for k in 0..sections {
        let lock = lock_pool[k % lock_pool.len()].clone();
        events.push(Event::Lock(lock.clone()));
        for _ in 0..slot_sizes[2 * k] {
            emit_mem(cfg, &locs, &mut events, &mut state, rng);
        }
        events.push(Event::Unlock(lock));
        for _ in 0..slot_sizes[2 * k + 1] {
            emit_mem(cfg, &locs, &mut events, &mut state, rng);
        }
    }
    EventTrace::new(events)
}

fn emit_mem(
    cfg: &GenConfig,
    locs: &[String],
    events: &mut Vec<Event>,
    state: &mut BTreeMap<String, i64>,
    rng: &mut ChaCha8Rng,
) {
    let loc = &locs[rng.gen_range(0..locs.len())];
    if rng.gen_bool(0.5) {
        let value = *cfg.value_domain.choose(rng).unwrap();
        state.insert(loc.clone(), value);
        events.push(Event::Write {
            loc: loc.clone(),
            value,
        });
    } else {
        let value = state.get(loc).copied().unwrap_or(0);
        events.push(Event::Read {
            loc: loc.clone(),
            value,
        });
    }
}

/// Picks a random applicable transformation instance of a kind drawn from the
/// mix; `None` when nothing applies at all.
fn random_transformation(
    trace: &EventTrace,
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Transformation> {
    let mix = &cfg.transform_mix;
    let mut order: Vec<(f64, u8)> = vec![
        (mix.reorder, 0),
        (mix.elim_write, 1),
        (mix.elim_read, 2),
        (mix.intro_read, 3),
    ];
    // Draw a kind; fall back through the others if nothing applies.
    let draw = rng.gen_range(0.0..mix.sum().max(f64::MIN_POSITIVE));
    let mut acc = 0.0;
    let mut start = 0;
    for (i, (w, _)) in order.iter().enumerate() {
        acc += w;
        if draw < acc {
            start = i;
            break;
        }
    }
    order.rotate_left(start);

    for (_, kind) in order {
        let found = match kind {
            0 => pick_position(trace, rng, |t, pos| {
                Transformation::ReorderAdjacent { pos }.apply(t).is_ok()
            })
            .map(|pos| Transformation::ReorderAdjacent { pos }),
            1 => pick_position(trace, rng, |t, pos| {
                Transformation::EliminateOverwrittenWrite { pos }
                    .apply(t)
                    .is_ok()
            })
            .map(|pos| Transformation::EliminateOverwrittenWrite { pos }),
            2 => pick_position(trace, rng, |t, pos| {
                Transformation::EliminateIrrelevantRead { pos }
                    .apply(t)
                    .is_ok()
            })
            .map(|pos| Transformation::EliminateIrrelevantRead { pos }),
            _ => pick_intro(trace, rng),
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

fn pick_position(
    trace: &EventTrace,
    rng: &mut ChaCha8Rng,
    applicable: impl Fn(&EventTrace, usize) -> bool,
) -> Option<usize> {
    let n = trace.events.len();
    if n == 0 {
        return None;
    }
    // Rejection sampling first, then a scan from a random offset.
    for _ in 0..16 {
        let pos = rng.gen_range(0..n);
        if applicable(trace, pos) {
            return Some(pos);
        }
    }
    let offset = rng.gen_range(0..n);
    (0..n)
        .map(|i| (i + offset) % n)
        .find(|&pos| applicable(trace, pos))
}

fn pick_intro(trace: &EventTrace, rng: &mut ChaCha8Rng) -> Option<Transformation> {
    let locs = trace.locations();
    if locs.is_empty() {
        return None;
    }
    for _ in 0..32 {
        let pos = rng.gen_range(0..=trace.events.len());
        let loc = locs[rng.gen_range(0..locs.len())].clone();
        let t = Transformation::IntroduceIrrelevantRead { pos, loc };
        if t.apply(trace).is_ok() {
            return Some(t);
        }
    }
    None
}

/// Locations the original writes in the gap after section `k`.
fn gap_writes(trace: &EventTrace, section: usize) -> Vec<&str> {
    let mut current = 0usize;
    let mut in_section = false;
    let mut out = Vec::new();
    for ev in &trace.events {
        match ev {
            Event::Lock(_) => in_section = true,
            Event::Unlock(_) => {
                in_section = false;
                current += 1;
            }
            Event::Write { loc, .. } if !in_section && current == section + 1 => {
                out.push(loc.as_str());
            }
            _ => {}
        }
    }
    out
}

fn inject_bug(
    original: &EventTrace,
    transformed: &mut EventTrace,
    kind: BugKind,
    rng: &mut ChaCha8Rng,
) -> BugKind {
    match kind {
        BugKind::ValueCorruption => {
            if corrupt_visible_write(original, transformed, rng) {
                BugKind::ValueCorruption
            } else {
                // No section write survives to its unlock; a fresh access is
                // always available instead.
                inject_bug(original, transformed, BugKind::FreshLocationAccess, rng)
            }
        }
        BugKind::FreshLocationAccess => {
            let n = transformed.events.len();
            let positions: Vec<usize> = (1..=n)
                .filter(|&p| {
                    transformed.events[..p]
                        .iter()
                        .any(|e| matches!(e, Event::Lock(_)))
                })
                .collect();
            let pos = *positions.choose(rng).expect("traces have a first lock");
            transformed.events.insert(
                pos,
                Event::Read {
                    loc: "fresh".to_string(),
                    value: 0,
                },
            );
            BugKind::FreshLocationAccess
        }
        BugKind::LockSequenceEdit => {
            // Rename one whole section's lock to an id the original never
            // uses, keeping the trace well formed.
            let sections: Vec<usize> = transformed
                .events
                .iter()
                .enumerate()
                .filter_map(|(i, e)| matches!(e, Event::Lock(_)).then_some(i))
                .collect();
            let at = *sections.choose(rng).unwrap();
            for i in at..transformed.events.len() {
                match &mut transformed.events[i] {
                    Event::Lock(l) if i == at => *l = "fresh_lock".to_string(),
                    Event::Unlock(l) => {
                        *l = "fresh_lock".to_string();
                        break;
                    }
                    _ => {}
                }
            }
            BugKind::LockSequenceEdit
        }
    }
}

/// Corrupts the last write to some location in a section such that the value
/// survives to the unlock boundary and the original never overwrites it in
/// the following gap; later reads are repaired to keep the trace coherent.
fn corrupt_visible_write(
    original: &EventTrace,
    transformed: &mut EventTrace,
    rng: &mut ChaCha8Rng,
) -> bool {
    let mut candidates: Vec<usize> = Vec::new();
    let mut section = 0usize;
    let mut in_section = false;
    for (i, ev) in transformed.events.iter().enumerate() {
        match ev {
            Event::Lock(_) => in_section = true,
            Event::Unlock(_) => {
                in_section = false;
                section += 1;
            }
            Event::Write { loc, .. } if in_section => {
                let mut later = false;
                for e in &transformed.events[i + 1..] {
                    match e {
                        Event::Unlock(_) => break,
                        Event::Write { loc: l, .. } if l == loc => {
                            later = true;
                            break;
                        }
                        _ => {}
                    }
                }
                if !later && !gap_writes(original, section).contains(&loc.as_str()) {
                    candidates.push(i);
                }
            }
            _ => {}
        }
    }
    let Some(&at) = candidates.choose(rng) else {
        return false;
    };
    let Event::Write { loc, value } = transformed.events[at].clone() else {
        unreachable!();
    };
    let corrupted = value + 1;
    transformed.events[at] = Event::Write {
        loc: loc.clone(),
        value: corrupted,
    };
    // Repair read coherence up to the next write of the location.
    for ev in transformed.events[at + 1..].iter_mut() {
        match ev {
            Event::Write { loc: l, .. } if *l == loc => break,
            Event::Read { loc: l, value } if *l == loc => *value = corrupted,
            _ => {}
        }
    }
    true
}
