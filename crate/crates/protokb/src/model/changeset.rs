//! Change sets and materialized property maps.
//!
//! A prototype mutates the state it inherits from its base through two
//! change sets: one that adds property values and one that removes them.
//! The two are distinct types, so a definition's add side cannot carry
//! removal data and vice versa. "Remove all values of a property" is kept
//! as an explicit property set rather than an enumeration of values.
//!
//! All value collections are ordered (`BTreeMap`/`BTreeSet` keyed by IRI),
//! which makes iteration deterministic and the wire encoding byte-stable.

use std::collections::{BTreeMap, BTreeSet};

use super::id::{PropertyId, PrototypeId};

type ValueMap = BTreeMap<PropertyId, BTreeSet<PrototypeId>>;

/// Property-value additions. No property maps to an empty value set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AddChangeSet {
    additions: ValueMap,
}

impl AddChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` under `property`. Duplicate insertions are no-ops.
    pub fn insert(&mut self, property: PropertyId, value: PrototypeId) -> &mut Self {
        self.additions.entry(property).or_default().insert(value);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.additions.is_empty()
    }

    /// Number of (property, value) pairs.
    pub fn value_pair_count(&self) -> usize {
        self.additions.values().map(BTreeSet::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PropertyId, &BTreeSet<PrototypeId>)> {
        self.additions.iter()
    }

    pub fn values(&self) -> impl Iterator<Item = &PrototypeId> {
        self.additions.values().flatten()
    }

    pub fn get(&self, property: &PropertyId) -> Option<&BTreeSet<PrototypeId>> {
        self.additions.get(property)
    }

    pub fn properties(&self) -> impl Iterator<Item = &PropertyId> {
        self.additions.keys()
    }
}

impl FromIterator<(PropertyId, PrototypeId)> for AddChangeSet {
    fn from_iter<I: IntoIterator<Item = (PropertyId, PrototypeId)>>(iter: I) -> Self {
        let mut set = Self::new();
        for (p, v) in iter {
            set.insert(p, v);
        }
        set
    }
}

/// Property-value removals plus whole-property removals.
///
/// Canonical form: a property listed in `remove_all` never also carries
/// individual removals (they would be redundant). The mutating API keeps
/// this invariant, so equality and wire encodings are stable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RemoveChangeSet {
    removals: ValueMap,
    remove_all: BTreeSet<PropertyId>,
}

impl RemoveChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks the single pair (`property`, `value`) for removal. Subsumed by
    /// an existing remove-all entry for the same property.
    pub fn insert_removal(&mut self, property: PropertyId, value: PrototypeId) -> &mut Self {
        if !self.remove_all.contains(&property) {
            self.removals.entry(property).or_default().insert(value);
        }
        self
    }

    /// Marks every value of `property` for removal, dropping now-redundant
    /// individual removals.
    pub fn insert_remove_all(&mut self, property: PropertyId) -> &mut Self {
        self.removals.remove(&property);
        self.remove_all.insert(property);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.removals.is_empty() && self.remove_all.is_empty()
    }

    pub fn removals(&self) -> impl Iterator<Item = (&PropertyId, &BTreeSet<PrototypeId>)> {
        self.removals.iter()
    }

    pub fn removal_values(&self) -> impl Iterator<Item = &PrototypeId> {
        self.removals.values().flatten()
    }

    pub fn remove_all(&self) -> impl Iterator<Item = &PropertyId> {
        self.remove_all.iter()
    }

    pub fn removes_all_of(&self, property: &PropertyId) -> bool {
        self.remove_all.contains(property)
    }
}

/// Fully materialized property → value-set mapping; the result of fixpoint
/// computation. Never stores an empty value set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyMap {
    entries: ValueMap,
}

impl PropertyMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, property: PropertyId, value: PrototypeId) {
        self.entries.entry(property).or_default().insert(value);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn property_count(&self) -> usize {
        self.entries.len()
    }

    /// Number of (property, value) pairs; the "properties per prototype"
    /// statistic of the benchmark reports.
    pub fn value_pair_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn get(&self, property: &PropertyId) -> Option<&BTreeSet<PrototypeId>> {
        self.entries.get(property)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PropertyId, &BTreeSet<PrototypeId>)> {
        self.entries.iter()
    }
}

impl FromIterator<(PropertyId, PrototypeId)> for PropertyMap {
    fn from_iter<I: IntoIterator<Item = (PropertyId, PrototypeId)>>(iter: I) -> Self {
        let mut map = Self::new();
        for (p, v) in iter {
            map.insert(p, v);
        }
        map
    }
}

/// Applies one definition's change sets to an inherited property state.
///
/// Removals (including remove-all) apply before additions, so a definition
/// can replace an inherited value by removing and re-adding under the same
/// property. Properties whose value set becomes empty are dropped.
pub fn apply_changeset(
    props: &PropertyMap,
    remove: &RemoveChangeSet,
    add: &AddChangeSet,
) -> PropertyMap {
    let mut entries = ValueMap::new();

    for (property, values) in &props.entries {
        if remove.removes_all_of(property) {
            continue;
        }
        let kept: BTreeSet<PrototypeId> = match remove.removals.get(property) {
            Some(removed) => values.difference(removed).cloned().collect(),
            None => values.clone(),
        };
        if !kept.is_empty() {
            entries.insert(property.clone(), kept);
        }
    }

    for (property, values) in &add.additions {
        entries
            .entry(property.clone())
            .or_default()
            .extend(values.iter().cloned());
    }

    PropertyMap { entries }
}
