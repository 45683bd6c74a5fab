//! Event traces and their text format.
//!
//! A trace is the sequence of shared-memory and synchronization events of one
//! thread run. The `.trc` format is line-oriented: optional `init <loc> <int>`
//! headers, then one event per line (`lock <id>`, `unlock <id>`,
//! `read <loc> <int>`, `write <loc> <int>`), with `#` line comments. Unknown
//! initial values default to 0.

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

use crate::thread_lang::SyncMode;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Event {
    Lock(String),
    Unlock(String),
    Read { loc: String, value: i64 },
    Write { loc: String, value: i64 },
}

impl Event {
    pub fn is_sync(&self) -> bool {
        matches!(self, Event::Lock(_) | Event::Unlock(_))
    }

    pub fn is_mem(&self) -> bool {
        !self.is_sync()
    }

    pub fn is_write(&self) -> bool {
        matches!(self, Event::Write { .. })
    }

    pub fn is_read(&self) -> bool {
        matches!(self, Event::Read { .. })
    }

    /// Location name for memory events, `None` for synchronization events.
    pub fn mem_loc(&self) -> Option<&str> {
        match self {
            Event::Read { loc, .. } | Event::Write { loc, .. } => Some(loc),
            _ => None,
        }
    }

    /// Two memory events conflict when they touch the same location and at
    /// least one writes.
    pub fn conflicts_with(&self, other: &Event) -> bool {
        match (self.mem_loc(), other.mem_loc()) {
            (Some(a), Some(b)) => a == b && (self.is_write() || other.is_write()),
            _ => false,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Lock(l) => write!(f, "lock {l}"),
            Event::Unlock(l) => write!(f, "unlock {l}"),
            Event::Read { loc, value } => write!(f, "read {loc} {value}"),
            Event::Write { loc, value } => write!(f, "write {loc} {value}"),
        }
    }
}

/// An event trace with its initial state over the mentioned locations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventTrace {
    pub init: BTreeMap<String, i64>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TraceParseError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: synchronization event carries a value")]
    ValueOnSync { line: usize },
    #[error("line {line}: memory event is missing its value")]
    MissingValueOnMem { line: usize },
}

/// Structural problems found by [`EventTrace::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    /// Event before the first synchronization (non-nested mode requires the
    /// first operation to be a lock; nested mode a synchronization).
    FirstOpNotSync { index: usize },
    /// Lock taken while one is held (non-nested mode).
    NestedLock { index: usize },
    /// Lock re-acquired while held.
    Reacquired { index: usize },
    /// Unlock of a lock that is not (or not the one) held.
    UnlockNotHeld { index: usize },
    /// Trace ends with locks held.
    HeldAtEnd { locks: Vec<String> },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::FirstOpNotSync { index } => {
                write!(f, "event {index}: memory access before the first lock")
            }
            TraceViolation::NestedLock { index } => {
                write!(f, "event {index}: nested lock in non-nested mode")
            }
            TraceViolation::Reacquired { index } => {
                write!(f, "event {index}: lock re-acquired while held")
            }
            TraceViolation::UnlockNotHeld { index } => {
                write!(f, "event {index}: unlock of a lock not held")
            }
            TraceViolation::HeldAtEnd { locks } => {
                write!(f, "trace ends holding {}", locks.join(", "))
            }
        }
    }
}

/// A read whose value disagrees with the replayed state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceViolation {
    pub index: usize,
    pub loc: String,
    pub expected: i64,
    pub found: i64,
}

impl fmt::Display for CoherenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "event {}: read {} {} but the replayed value is {}",
            self.index, self.loc, self.found, self.expected
        )
    }
}

impl EventTrace {
    pub fn new(events: Vec<Event>) -> Self {
        EventTrace {
            init: BTreeMap::new(),
            events,
        }
    }

    /// Initial value of `loc` (0 unless an `init` header says otherwise).
    pub fn init_value(&self, loc: &str) -> i64 {
        self.init.get(loc).copied().unwrap_or(0)
    }

    /// All location names mentioned by events or init headers, sorted.
    pub fn locations(&self) -> Vec<String> {
        let mut locs: Vec<String> = self.init.keys().cloned().collect();
        for ev in &self.events {
            if let Some(l) = ev.mem_loc() {
                if !locs.iter().any(|x| x == l) {
                    locs.push(l.to_string());
                }
            }
        }
        locs.sort();
        locs.dedup();
        locs
    }

    pub fn lock_event_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Lock(_)))
            .count()
    }

    /// Structural validity under the given locking discipline. Returns all
    /// violations; an empty list means ok.
    pub fn validate(&self, mode: SyncMode) -> Vec<TraceViolation> {
        let mut violations = Vec::new();
        let mut held: Vec<&str> = Vec::new();
        let mut synced = false;
        for (i, ev) in self.events.iter().enumerate() {
            match ev {
                Event::Lock(l) => {
                    match mode {
                        SyncMode::NonNested if !held.is_empty() => {
                            violations.push(TraceViolation::NestedLock { index: i });
                            held.push(l); // keep tracking to avoid cascades
                        }
                        _ if held.contains(&l.as_str()) => {
                            violations.push(TraceViolation::Reacquired { index: i })
                        }
                        _ => held.push(l),
                    }
                    synced = true;
                }
                Event::Unlock(l) => {
                    if let Some(p) = held.iter().position(|h| *h == l) {
                        held.remove(p);
                    } else {
                        violations.push(TraceViolation::UnlockNotHeld { index: i });
                    }
                    synced = true;
                }
                _ => {
                    if !synced {
                        violations.push(TraceViolation::FirstOpNotSync { index: i });
                        synced = true; // report once
                    }
                }
            }
        }
        if !held.is_empty() {
            violations.push(TraceViolation::HeldAtEnd {
                locks: held.iter().map(|s| s.to_string()).collect(),
            });
        }
        violations
    }

    /// Checks that every read returns the last value written to its location
    /// (or the initial value). Holds for traces of standalone runs.
    pub fn check_read_coherence(&self) -> Result<(), CoherenceViolation> {
        let mut state: BTreeMap<&str, i64> = BTreeMap::new();
        for (i, ev) in self.events.iter().enumerate() {
            match ev {
                Event::Write { loc, value } => {
                    state.insert(loc, *value);
                }
                Event::Read { loc, value } => {
                    let expected = state
                        .get(loc.as_str())
                        .copied()
                        .unwrap_or_else(|| self.init_value(loc));
                    if expected != *value {
                        return Err(CoherenceViolation {
                            index: i,
                            loc: loc.clone(),
                            expected,
                            found: *value,
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Canonical text form: init headers first (sorted by location), then
    /// events in order.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (loc, value) in &self.init {
            out.push_str(&format!("init {loc} {value}\n"));
        }
        for ev in &self.events {
            out.push_str(&ev.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses the `.trc` text format.
pub fn parse_trace(text: &str) -> Result<EventTrace, TraceParseError> {
    let mut trace = EventTrace::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let parse_int = |tok: &str| -> Result<i64, TraceParseError> {
            tok.parse::<i64>().map_err(|_| TraceParseError::Syntax {
                line,
                message: format!("expected an integer, found '{tok}'"),
            })
        };
        match tokens[0] {
            "init" => {
                if tokens.len() != 3 {
                    return Err(TraceParseError::Syntax {
                        line,
                        message: "init takes a location and a value".to_string(),
                    });
                }
                let value = parse_int(tokens[2])?;
                trace.init.insert(tokens[1].to_string(), value);
            }
            kind @ ("lock" | "unlock") => {
                if tokens.len() > 2 {
                    return Err(TraceParseError::ValueOnSync { line });
                }
                if tokens.len() < 2 {
                    return Err(TraceParseError::Syntax {
                        line,
                        message: format!("{kind} takes a lock name"),
                    });
                }
                let name = tokens[1].to_string();
                trace.events.push(if kind == "lock" {
                    Event::Lock(name)
                } else {
                    Event::Unlock(name)
                });
            }
            kind @ ("read" | "write") => {
                if tokens.len() < 3 {
                    return Err(TraceParseError::MissingValueOnMem { line });
                }
                if tokens.len() > 3 {
                    return Err(TraceParseError::Syntax {
                        line,
                        message: format!("{kind} takes a location and a value"),
                    });
                }
                let loc = tokens[1].to_string();
                let value = parse_int(tokens[2])?;
                trace.events.push(if kind == "read" {
                    Event::Read { loc, value }
                } else {
                    Event::Write { loc, value }
                });
            }
            other => {
                return Err(TraceParseError::Syntax {
                    line,
                    message: format!("unknown event kind '{other}'"),
                });
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_LEFT: &str = "init x 0\ninit y 0\ninit z 0\nlock m\nwrite x 1\nwrite x 2\nunlock m\nread x 2\nread y 0\nlock m\nwrite x 0\nunlock m\n";

    #[test]
    fn parses_the_reference_trace() {
        let t = parse_trace(FIG_LEFT).unwrap();
        assert_eq!(t.events.len(), 9);
        assert_eq!(t.lock_event_count(), 2);
        assert_eq!(
            t.events.iter().filter(|e| e.is_write()).count(),
            3
        );
        assert_eq!(t.events.iter().filter(|e| e.is_read()).count(), 2);
        assert_eq!(
            t.events
                .iter()
                .filter(|e| matches!(e, Event::Unlock(_)))
                .count(),
            2
        );
        assert!(t.validate(SyncMode::NonNested).is_empty());
        assert!(t.check_read_coherence().is_ok());
    }

    #[test]
    fn empty_input_is_the_empty_trace() {
        let t = parse_trace("").unwrap();
        assert!(t.events.is_empty());
        assert!(t.validate(SyncMode::NonNested).is_empty());
    }

    #[test]
    fn sync_with_value_is_an_error() {
        assert_eq!(
            parse_trace("lock m 3"),
            Err(TraceParseError::ValueOnSync { line: 1 })
        );
    }

    #[test]
    fn mem_without_value_is_an_error() {
        assert_eq!(
            parse_trace("read x"),
            Err(TraceParseError::MissingValueOnMem { line: 1 })
        );
    }

    #[test]
    fn leading_write_fails_non_nested_validation() {
        let t = parse_trace("write x 1\nlock l\nunlock l\n").unwrap();
        assert_eq!(
            t.validate(SyncMode::NonNested),
            vec![TraceViolation::FirstOpNotSync { index: 0 }]
        );
    }

    #[test]
    fn nesting_validates_only_in_nested_mode() {
        let t = parse_trace("lock l\nlock m\nunlock m\nunlock l\n").unwrap();
        assert!(t.validate(SyncMode::Nested).is_empty());
        assert_eq!(
            t.validate(SyncMode::NonNested),
            vec![TraceViolation::NestedLock { index: 1 }]
        );
    }

    #[test]
    fn incoherent_read_is_reported() {
        let t = parse_trace("lock l\nwrite x 1\nread x 2\nunlock l\n").unwrap();
        let err = t.check_read_coherence().unwrap_err();
        assert_eq!(err.expected, 1);
        assert_eq!(err.found, 2);
    }

    #[test]
    fn emit_parse_round_trip_is_identity() {
        let t = parse_trace(FIG_LEFT).unwrap();
        let emitted = t.emit();
        assert_eq!(parse_trace(&emitted).unwrap(), t);
        // Canonical form is byte-stable.
        assert_eq!(parse_trace(&emitted).unwrap().emit(), emitted);
    }
}
