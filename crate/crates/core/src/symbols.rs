//! Symbols as named sets of states, and the grounding operators.
//!
//! A grounding classifier is represented by its extension: an explicit
//! membership set over one level's state space. Set operations on those
//! sets give the meaning of the logical connectives between symbols.

use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::hierarchy::Hierarchy;
use crate::mdp::StateId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolError {
    #[error("grounding sets live at different levels ({left} vs {right})")]
    LevelMismatch { left: usize, right: usize },
    #[error("grounding sets have different universes ({left} vs {right} states)")]
    UniverseMismatch { left: usize, right: usize },
    #[error("level {level} is outside 0..={top}")]
    LevelOutOfRange { level: usize, top: usize },
    #[error("state {state} is outside level {level}")]
    UnknownState { level: usize, state: StateId },
    #[error("symbol `{0}` is already defined at this level")]
    DuplicateSymbol(String),
}

/// A set of states at one level, stored densely.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroundingSet {
    level: usize,
    members: FixedBitSet,
}

impl GroundingSet {
    pub fn empty(level: usize, universe: usize) -> Self {
        Self {
            level,
            members: FixedBitSet::with_capacity(universe),
        }
    }

    pub fn full(level: usize, universe: usize) -> Self {
        let mut s = Self::empty(level, universe);
        s.members.insert_range(..);
        s
    }

    pub fn singleton(level: usize, universe: usize, s: StateId) -> Self {
        let mut set = Self::empty(level, universe);
        set.insert(s);
        set
    }

    /// Panics if a state is outside the universe.
    pub fn from_states<I: IntoIterator<Item = StateId>>(level: usize, universe: usize, it: I) -> Self {
        let mut set = Self::empty(level, universe);
        for s in it {
            set.insert(s);
        }
        set
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of states in the level this set lives in.
    pub fn universe(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn contains(&self, s: StateId) -> bool {
        self.members.contains(s.0)
    }

    pub fn insert(&mut self, s: StateId) {
        assert!(
            s.0 < self.members.len(),
            "{s} outside a universe of {} states",
            self.members.len()
        );
        self.members.insert(s.0);
    }

    pub fn remove(&mut self, s: StateId) {
        self.members.set(s.0, false);
    }

    pub fn clear(&mut self) {
        self.members.clear();
    }

    pub fn len(&self) -> usize {
        self.members.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.members.ones().map(StateId)
    }

    pub fn first(&self) -> Option<StateId> {
        self.members.minimum().map(StateId)
    }

    fn compatible(&self, other: &Self) -> Result<(), SymbolError> {
        if self.level != other.level {
            return Err(SymbolError::LevelMismatch {
                left: self.level,
                right: other.level,
            });
        }
        if self.members.len() != other.members.len() {
            return Err(SymbolError::UniverseMismatch {
                left: self.members.len(),
                right: other.members.len(),
            });
        }
        Ok(())
    }

    pub fn union(&self, other: &Self) -> Result<Self, SymbolError> {
        let mut out = self.clone();
        out.union_with(other)?;
        Ok(out)
    }

    pub fn union_with(&mut self, other: &Self) -> Result<(), SymbolError> {
        self.compatible(other)?;
        self.members.union_with(&other.members);
        Ok(())
    }

    pub fn intersection(&self, other: &Self) -> Result<Self, SymbolError> {
        self.compatible(other)?;
        let mut out = self.clone();
        out.members.intersect_with(&other.members);
        Ok(out)
    }

    pub fn difference(&self, other: &Self) -> Result<Self, SymbolError> {
        self.compatible(other)?;
        let mut out = self.clone();
        out.members.difference_with(&other.members);
        Ok(out)
    }

    pub fn is_subset(&self, other: &Self) -> Result<bool, SymbolError> {
        self.compatible(other)?;
        Ok(self.members.is_subset(&other.members))
    }

    /// True iff the sets share at least one state.
    pub fn intersects(&self, other: &Self) -> Result<bool, SymbolError> {
        self.compatible(other)?;
        Ok(!self.members.is_disjoint(&other.members))
    }
}

impl fmt::Debug for GroundingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.level)?;
        f.debug_set().entries(self.members.ones()).finish()
    }
}

/// A propositional symbol: a name plus its grounding set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub grounding: GroundingSet,
}

/// Symbols defined over one level, with unique names.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
    by_name: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(&mut self, name: impl Into<String>, grounding: GroundingSet) -> Result<(), SymbolError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(SymbolError::DuplicateSymbol(name));
        }
        self.by_name.insert(name.clone(), self.symbols.len());
        self.symbols.push(Symbol { name, grounding });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.by_name.get(name).map(|&i| &self.symbols[i])
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.iter()
    }
}

/// `G`: the grounding of level-`j` state `s` at level `j − 1`.
pub fn ground(h: &Hierarchy, j: usize, s: StateId) -> Result<GroundingSet, SymbolError> {
    let level = abstract_level(h, j)?;
    if s.0 >= level.num_states() {
        return Err(SymbolError::UnknownState { level: j, state: s });
    }
    Ok(level.grounding(s).clone())
}

/// `G` over a set of level-`j` states: the union of member groundings.
pub fn ground_set(h: &Hierarchy, j: usize, states: &GroundingSet) -> Result<GroundingSet, SymbolError> {
    let level = abstract_level(h, j)?;
    check_level(states, j, level.num_states())?;
    let mut out = GroundingSet::empty(j - 1, h.num_states(j - 1));
    for s in states.iter() {
        out.union_with(level.grounding(s))?;
    }
    Ok(out)
}

/// `G0`: apply `G` repeatedly down to the base MDP. Identity at level 0.
pub fn final_ground(h: &Hierarchy, j: usize, states: &GroundingSet) -> Result<GroundingSet, SymbolError> {
    if j > h.depth() {
        return Err(SymbolError::LevelOutOfRange {
            level: j,
            top: h.depth(),
        });
    }
    check_level(states, j, h.num_states(j))?;
    if j == 0 {
        return Ok(states.clone());
    }
    let level = h.abstract_level(j).expect("level checked");
    let mut out = GroundingSet::empty(0, h.num_states(0));
    for s in states.iter() {
        out.union_with(level.final_grounding(s))?;
    }
    Ok(out)
}

fn abstract_level(h: &Hierarchy, j: usize) -> Result<&crate::abstraction::AbstractLevel, SymbolError> {
    if j == 0 || j > h.depth() {
        return Err(SymbolError::LevelOutOfRange {
            level: j,
            top: h.depth(),
        });
    }
    Ok(h.abstract_level(j).expect("level checked"))
}

fn check_level(states: &GroundingSet, j: usize, universe: usize) -> Result<(), SymbolError> {
    if states.level() != j {
        return Err(SymbolError::LevelMismatch {
            left: states.level(),
            right: j,
        });
    }
    if states.universe() != universe {
        return Err(SymbolError::UniverseMismatch {
            left: states.universe(),
            right: universe,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(level: usize, n: usize, xs: &[usize]) -> GroundingSet {
        GroundingSet::from_states(level, n, xs.iter().map(|&x| StateId(x)))
    }

    #[test]
    fn basic_algebra() {
        let a = set(1, 10, &[1, 2, 3]);
        let b = set(1, 10, &[3, 4]);
        assert_eq!(a.intersection(&a).unwrap(), a);
        assert!(a.is_subset(&a.union(&b).unwrap()).unwrap());
        assert_eq!(a.difference(&b).unwrap(), set(1, 10, &[1, 2]));
        assert_eq!(a.intersection(&b).unwrap(), set(1, 10, &[3]));
        assert!(a.intersects(&b).unwrap());
        assert!(GroundingSet::empty(1, 10).is_empty());
        assert_eq!(GroundingSet::full(1, 10).len(), 10);
    }

    #[test]
    fn level_mismatch_is_an_error() {
        let a = set(1, 10, &[1]);
        let b = set(2, 10, &[1]);
        assert_eq!(
            a.union(&b),
            Err(SymbolError::LevelMismatch { left: 1, right: 2 })
        );
        let c = set(1, 11, &[1]);
        assert!(matches!(
            a.is_subset(&c),
            Err(SymbolError::UniverseMismatch { .. })
        ));
    }

    #[test]
    fn symbol_names_are_unique() {
        let mut t = SymbolTable::new();
        t.define("init", set(0, 3, &[0])).unwrap();
        assert_eq!(
            t.define("init", set(0, 3, &[1])),
            Err(SymbolError::DuplicateSymbol("init".into()))
        );
        assert_eq!(t.get("init").unwrap().grounding, set(0, 3, &[0]));
    }

    fn arb_set() -> impl Strategy<Value = GroundingSet> {
        proptest::collection::vec(any::<bool>(), 40).prop_map(|bits| {
            GroundingSet::from_states(
                0,
                40,
                bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| StateId(i)),
            )
        })
    }

    proptest! {
        #[test]
        fn lattice_laws(a in arb_set(), b in arb_set(), c in arb_set()) {
            let ab = a.union(&b).unwrap();
            prop_assert!(a.is_subset(&ab).unwrap());
            prop_assert!(a.intersection(&b).unwrap().is_subset(&a).unwrap());
            prop_assert_eq!(a.intersection(&ab).unwrap(), a.clone());
            // distributivity
            let lhs = a.intersection(&b.union(&c).unwrap()).unwrap();
            let rhs = a.intersection(&b).unwrap().union(&a.intersection(&c).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            let d = a.difference(&b).unwrap();
            prop_assert!(!d.intersects(&b).unwrap());
            prop_assert_eq!(d.union(&a.intersection(&b).unwrap()).unwrap(), a.clone());
            prop_assert_eq!(a.len() + b.len(), ab.len() + a.intersection(&b).unwrap().len());
        }
    }
}
