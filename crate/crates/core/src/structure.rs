//! Multilevel bond structures.
//!
//! A structure of order N carries element levels 0..=N. Level 0 holds the
//! base elements. A bond binds a nonempty set of elements one level down,
//! and the bond itself is an element of its own level, so bonds of bonds
//! are just higher bonds. That identification is the whole point: level k+1
//! is nothing but the bonds formed over level k.
//!
//! Alongside the levels sits a partial state table: subsets of a level can
//! carry a set of admissible states, and a bond can record the state its
//! boundary was in when it formed. When the table has an entry for a bond's
//! boundary, the bond's formation state must be a member of that entry. The
//! table is partial on purpose; level 0 may have no states at all.
//!
//! Identity sections single out, per element, a bond that binds exactly
//! that element, which embeds a level into the next one the way a unit
//! embeds a set into formal sums over it.
//!
//! A structure built through the `add_*` methods is valid by construction.
//! [`Hyperstructure::from_parts`] admits arbitrary records instead and is
//! the entry point for deserialization and for tests that need broken
//! structures; [`Hyperstructure::validate`] reports every broken law.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::Error;
use crate::id::{ElementId, StateValue};
use crate::Result;

/// A bond: one element of level k binding a subset of level k-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    id: ElementId,
    boundary: BTreeSet<ElementId>,
    formation_state: Option<StateValue>,
}

impl Bond {
    /// Assemble a bond record without any checks. Raw material for
    /// [`Hyperstructure::from_parts`]; the builder path is
    /// [`Hyperstructure::add_bond`].
    pub fn new(
        id: ElementId,
        boundary: BTreeSet<ElementId>,
        formation_state: Option<StateValue>,
    ) -> Self {
        Bond { id, boundary, formation_state }
    }

    pub fn id(&self) -> &ElementId {
        &self.id
    }

    pub fn level(&self) -> usize {
        self.id.level()
    }

    pub fn boundary(&self) -> &BTreeSet<ElementId> {
        &self.boundary
    }

    pub fn formation_state(&self) -> Option<&StateValue> {
        self.formation_state.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SubsetKey {
    level: usize,
    members: Vec<String>,
}

impl SubsetKey {
    fn new(level: usize, members: impl IntoIterator<Item = String>) -> Self {
        let mut members: Vec<String> = members.into_iter().collect();
        members.sort();
        members.dedup();
        SubsetKey { level, members }
    }
}

/// Partial map from subsets of a level to the set of states assigned there.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateTable {
    entries: BTreeMap<SubsetKey, BTreeSet<StateValue>>,
}

impl StateTable {
    pub fn new() -> Self {
        StateTable::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Add one state to the entry for a subset, creating the entry if new.
    pub fn insert(
        &mut self,
        level: usize,
        members: impl IntoIterator<Item = String>,
        value: StateValue,
    ) {
        self.entries
            .entry(SubsetKey::new(level, members))
            .or_default()
            .insert(value);
    }

    /// The states assigned to exactly this subset, if any.
    pub fn values_for(&self, level: usize, members: &[&str]) -> Option<&BTreeSet<StateValue>> {
        let key = SubsetKey::new(level, members.iter().map(|m| m.to_string()));
        self.entries.get(&key)
    }

    /// All entries, ordered by level and subset.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[String], &BTreeSet<StateValue>)> {
        self.entries
            .iter()
            .map(|(key, values)| (key.level, key.members.as_slice(), values))
    }
}

/// The structure itself: levels of elements, the bonds over them, the state
/// table, and optional identity sections.
#[derive(Debug, Clone)]
pub struct Hyperstructure {
    order: usize,
    /// Labels per level in admission order. Raw structures may hold
    /// duplicates here; validation reports them.
    levels: Vec<Vec<String>>,
    lookup: Vec<HashSet<String>>,
    bonds: Vec<Bond>,
    bond_index: HashMap<ElementId, usize>,
    states: StateTable,
    sections: BTreeMap<ElementId, ElementId>,
    strict: bool,
}

impl Hyperstructure {
    /// An empty structure with levels 0..=order.
    pub fn new(order: usize) -> Self {
        Hyperstructure {
            order,
            levels: vec![Vec::new(); order + 1],
            lookup: vec![HashSet::new(); order + 1],
            bonds: Vec::new(),
            bond_index: HashMap::new(),
            states: StateTable::new(),
            sections: BTreeMap::new(),
            strict: false,
        }
    }

    /// Assemble a structure from raw records without admission checks.
    ///
    /// Level lists are derived: level 0 is `base`, level k is the ids of the
    /// level-k bonds in the order given. Bonds whose level falls outside
    /// 1..=order are kept as records so validation can point at them, but
    /// never become elements. Nothing is checked here; call
    /// [`Hyperstructure::validate`] on the result.
    pub fn from_parts(
        order: usize,
        base: Vec<String>,
        bonds: Vec<Bond>,
        states: StateTable,
        sections: Vec<(ElementId, ElementId)>,
        strict: bool,
    ) -> Self {
        let mut levels = vec![Vec::new(); order + 1];
        levels[0] = base;
        for bond in &bonds {
            let level = bond.level();
            if (1..=order).contains(&level) {
                levels[level].push(bond.id().label().to_string());
            }
        }
        let lookup = levels
            .iter()
            .map(|labels| labels.iter().cloned().collect())
            .collect();
        let mut bond_index = HashMap::new();
        for (i, bond) in bonds.iter().enumerate() {
            bond_index.entry(bond.id().clone()).or_insert(i);
        }
        Hyperstructure {
            order,
            levels,
            lookup,
            bonds,
            bond_index,
            states,
            sections: sections.into_iter().collect(),
            strict,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn strict(&self) -> bool {
        self.strict
    }

    /// Declare or revoke boundary/state injectivity. Turning it on fails if
    /// the bonds already on board break it, so a strict structure built
    /// through the builder is strict all the way down.
    pub fn set_strict(&mut self, strict: bool) -> Result<()> {
        if strict {
            if let Some((first, second)) = self.find_duplicate_shape() {
                return Err(Error::DuplicateBond { first, second });
            }
        }
        self.strict = strict;
        Ok(())
    }

    pub fn level_size(&self, level: usize) -> Result<usize> {
        self.check_level(level)?;
        Ok(self.lookup[level].len())
    }

    /// Distinct element counts for levels 0..=order.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.lookup.iter().map(|set| set.len()).collect()
    }

    /// The elements of one level, sorted by label.
    pub fn level_elements(&self, level: usize) -> Result<Vec<ElementId>> {
        self.check_level(level)?;
        let mut labels: Vec<&String> = self.lookup[level].iter().collect();
        labels.sort();
        Ok(labels
            .into_iter()
            .map(|label| ElementId::new(label.clone(), level))
            .collect())
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        id.level() <= self.order && self.lookup[id.level()].contains(id.label())
    }

    /// Everywhere a label occurs, ordered by level.
    pub fn find_by_label(&self, label: &str) -> Vec<ElementId> {
        (0..=self.order)
            .filter(|&level| self.lookup[level].contains(label))
            .map(|level| ElementId::new(label, level))
            .collect()
    }

    pub fn add_base_element(&mut self, label: impl Into<String>) -> Result<ElementId> {
        let label = label.into();
        if self.lookup[0].contains(&label) {
            return Err(Error::DuplicateLabel { label, level: 0 });
        }
        self.levels[0].push(label.clone());
        self.lookup[0].insert(label.clone());
        Ok(ElementId::new(label, 0))
    }

    /// Form a bond at `level` over the given members of `level - 1`.
    ///
    /// If a formation state is supplied and the state table has an entry for
    /// the member subset, the state must be one of the assigned values. In a
    /// strict structure the (boundary, state) pair must be new at its level.
    pub fn add_bond(
        &mut self,
        level: usize,
        binds: &[ElementId],
        formation_state: Option<StateValue>,
        label: impl Into<String>,
    ) -> Result<ElementId> {
        let label = label.into();
        if level == 0 || level > self.order {
            return Err(Error::BadLevel { level, order: self.order });
        }
        if self.lookup[level].contains(&label) {
            return Err(Error::DuplicateLabel { label, level });
        }
        if binds.is_empty() {
            return Err(Error::EmptyBoundary { label });
        }
        for member in binds {
            if member.level() != level - 1 {
                return Err(Error::LevelMismatch {
                    expected: level - 1,
                    found: member.clone(),
                });
            }
            if !self.contains(member) {
                return Err(Error::UnknownElement(member.clone()));
            }
        }
        let boundary: BTreeSet<ElementId> = binds.iter().cloned().collect();
        if let Some(state) = &formation_state {
            let labels: Vec<&str> = boundary.iter().map(|m| m.label()).collect();
            if let Some(entry) = self.states.values_for(level - 1, &labels) {
                if !entry.contains(state) {
                    return Err(Error::StateNotAssigned { label, state: state.clone() });
                }
            }
        }
        if self.strict {
            for other in self.bonds.iter().filter(|b| b.level() == level) {
                if other.boundary == boundary
                    && other.formation_state == formation_state
                {
                    return Err(Error::DuplicateBond {
                        first: other.id.clone(),
                        second: ElementId::new(label, level),
                    });
                }
            }
        }
        let id = ElementId::new(label.clone(), level);
        self.levels[level].push(label.clone());
        self.lookup[level].insert(label);
        self.bond_index.insert(id.clone(), self.bonds.len());
        self.bonds.push(Bond { id: id.clone(), boundary, formation_state });
        Ok(id)
    }

    pub fn bond(&self, id: &ElementId) -> Option<&Bond> {
        self.bond_index.get(id).map(|&i| &self.bonds[i])
    }

    /// The members a bond binds.
    pub fn boundary(&self, id: &ElementId) -> Result<&BTreeSet<ElementId>> {
        self.bond(id)
            .map(Bond::boundary)
            .ok_or_else(|| Error::UnknownBond(id.clone()))
    }

    pub fn formation_state(&self, id: &ElementId) -> Result<Option<&StateValue>> {
        self.bond(id)
            .map(Bond::formation_state)
            .ok_or_else(|| Error::UnknownBond(id.clone()))
    }

    /// All bond records in admission order.
    pub fn bonds(&self) -> impl Iterator<Item = &Bond> {
        self.bonds.iter()
    }

    /// The bonds of one level, sorted by label.
    pub fn bonds_at(&self, level: usize) -> Result<Vec<&Bond>> {
        self.check_level(level)?;
        let mut out: Vec<&Bond> = self.bonds.iter().filter(|b| b.level() == level).collect();
        out.sort_by(|a, b| a.id().label().cmp(b.id().label()));
        Ok(out)
    }

    /// Assign one admissible state to a subset of a level.
    pub fn assign_state(
        &mut self,
        level: usize,
        subset: &[ElementId],
        value: StateValue,
    ) -> Result<()> {
        self.check_level(level)?;
        for member in subset {
            if member.level() != level {
                return Err(Error::LevelMismatch { expected: level, found: member.clone() });
            }
            if !self.contains(member) {
                return Err(Error::UnknownElement(member.clone()));
            }
        }
        self.states
            .insert(level, subset.iter().map(|m| m.label().to_string()), value);
        Ok(())
    }

    pub fn state_table(&self) -> &StateTable {
        &self.states
    }

    /// The states assigned to a subset of elements, if an entry exists.
    pub fn states_for(&self, level: usize, subset: &[ElementId]) -> Option<&BTreeSet<StateValue>> {
        let labels: Vec<&str> = subset.iter().map(|m| m.label()).collect();
        self.states.values_for(level, &labels)
    }

    /// Record the bond that stands for `element` one level up. The bond must
    /// bind exactly that element.
    pub fn set_identity_section(&mut self, element: &ElementId, bond: &ElementId) -> Result<()> {
        if !self.contains(element) {
            return Err(Error::UnknownElement(element.clone()));
        }
        let record = self
            .bond(bond)
            .ok_or_else(|| Error::UnknownBond(bond.clone()))?;
        if bond.level() != element.level() + 1
            || record.boundary.len() != 1
            || !record.boundary.contains(element)
        {
            return Err(Error::BoundaryMismatch {
                element: element.clone(),
                bond: bond.clone(),
            });
        }
        self.sections.insert(element.clone(), bond.clone());
        Ok(())
    }

    pub fn identity_section(&self, element: &ElementId) -> Option<&ElementId> {
        self.sections.get(element)
    }

    pub fn identity_sections(&self) -> impl Iterator<Item = (&ElementId, &ElementId)> {
        self.sections.iter()
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level > self.order {
            return Err(Error::BadLevel { level, order: self.order });
        }
        Ok(())
    }

    fn find_duplicate_shape(&self) -> Option<(ElementId, ElementId)> {
        let mut seen: BTreeMap<(Vec<&ElementId>, Option<&StateValue>), &ElementId> =
            BTreeMap::new();
        for bond in &self.bonds {
            let shape = (
                bond.boundary.iter().collect::<Vec<_>>(),
                bond.formation_state.as_ref(),
            );
            if let Some(first) = seen.get(&shape) {
                return Some(((*first).clone(), bond.id.clone()));
            }
            seen.insert(shape, &bond.id);
        }
        None
    }

    pub(crate) fn raw_levels(&self) -> &[Vec<String>] {
        &self.levels
    }
}

// Two structures are equal when they present the same elements, bonds,
// states, sections, and flags, regardless of admission order.
impl PartialEq for Hyperstructure {
    fn eq(&self, other: &Self) -> bool {
        if self.order != other.order
            || self.strict != other.strict
            || self.states != other.states
            || self.sections != other.sections
        {
            return false;
        }
        let sorted = |levels: &[Vec<String>]| -> Vec<Vec<String>> {
            levels
                .iter()
                .map(|labels| {
                    let mut labels = labels.clone();
                    labels.sort();
                    labels
                })
                .collect()
        };
        if sorted(&self.levels) != sorted(&other.levels) {
            return false;
        }
        let shape = |h: &Self| -> Vec<(ElementId, BTreeSet<ElementId>, Option<StateValue>)> {
            let mut bonds: Vec<_> = h
                .bonds
                .iter()
                .map(|b| (b.id.clone(), b.boundary.clone(), b.formation_state.clone()))
                .collect();
            bonds.sort();
            bonds
        };
        shape(self) == shape(other)
    }
}

impl Eq for Hyperstructure {}
