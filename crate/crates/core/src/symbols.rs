//! Interning of shared-memory locations and lock names.
//!
//! Locations and locks live in disjoint namespaces. A checking session interns
//! every name of interest up front; the set of interned locations *is* the
//! memory universe `M` that states are total over, so all parties to a
//! comparison must share one [`Symbols`] table.

use std::collections::HashMap;
use std::fmt;

/// Index of a shared memory location in a [`Symbols`] table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocId(pub u32);

/// Index of a lock name in a [`Symbols`] table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LockId(pub u32);

impl LocId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Two-namespace string interner for locations and locks.
#[derive(Debug, Clone, Default)]
pub struct Symbols {
    loc_names: Vec<String>,
    loc_ids: HashMap<String, LocId>,
    lock_names: Vec<String>,
    lock_ids: HashMap<String, LockId>,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_loc(&mut self, name: &str) -> LocId {
        if let Some(&id) = self.loc_ids.get(name) {
            return id;
        }
        let id = LocId(self.loc_names.len() as u32);
        self.loc_names.push(name.to_string());
        self.loc_ids.insert(name.to_string(), id);
        id
    }

    pub fn intern_lock(&mut self, name: &str) -> LockId {
        if let Some(&id) = self.lock_ids.get(name) {
            return id;
        }
        let id = LockId(self.lock_names.len() as u32);
        self.lock_names.push(name.to_string());
        self.lock_ids.insert(name.to_string(), id);
        id
    }

    pub fn loc(&self, name: &str) -> Option<LocId> {
        self.loc_ids.get(name).copied()
    }

    pub fn lock(&self, name: &str) -> Option<LockId> {
        self.lock_ids.get(name).copied()
    }

    pub fn loc_name(&self, id: LocId) -> &str {
        &self.loc_names[id.index()]
    }

    pub fn lock_name(&self, id: LockId) -> &str {
        &self.lock_names[id.index()]
    }

    /// Size of the memory universe `M`.
    pub fn num_locs(&self) -> usize {
        self.loc_names.len()
    }

    pub fn num_locks(&self) -> usize {
        self.lock_names.len()
    }

    pub fn locs(&self) -> impl Iterator<Item = LocId> + '_ {
        (0..self.loc_names.len() as u32).map(LocId)
    }
}

/// A total state over the interned location universe, indexed by [`LocId`].
///
/// Lookups outside the universe are an internal invariant violation and panic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    values: Vec<i64>,
}

impl State {
    /// All-zero state over a universe of `num_locs` locations.
    pub fn zeroed(num_locs: usize) -> Self {
        State {
            values: vec![0; num_locs],
        }
    }

    pub fn from_values(values: Vec<i64>) -> Self {
        State { values }
    }

    pub fn get(&self, loc: LocId) -> i64 {
        self.values[loc.index()]
    }

    pub fn set(&mut self, loc: LocId, value: i64) {
        self.values[loc.index()] = value;
    }

    pub fn num_locs(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Renders as `{x: 0, y: 1}` with names resolved through `symbols`.
    pub fn display<'a>(&'a self, symbols: &'a Symbols) -> impl fmt::Display + 'a {
        DisplayState {
            state: self,
            symbols,
        }
    }
}

struct DisplayState<'a> {
    state: &'a State,
    symbols: &'a Symbols,
}

impl fmt::Display for DisplayState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.state.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}: {}", self.symbols.loc_name(LocId(i as u32)), v)?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable_and_disjoint() {
        let mut syms = Symbols::new();
        let x = syms.intern_loc("x");
        let l = syms.intern_lock("x"); // same spelling, different namespace
        assert_eq!(syms.intern_loc("x"), x);
        assert_eq!(syms.intern_lock("x"), l);
        assert_eq!(syms.num_locs(), 1);
        assert_eq!(syms.num_locks(), 1);
    }

    #[test]
    fn state_display_uses_names() {
        let mut syms = Symbols::new();
        syms.intern_loc("x");
        syms.intern_loc("y");
        let mut s = State::zeroed(2);
        s.set(LocId(1), 7);
        assert_eq!(s.display(&syms).to_string(), "{x: 0, y: 7}");
    }
}
