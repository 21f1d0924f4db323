//! Consistency checking and the knowledge-base builder.
//!
//! A set of prototype definitions only becomes a [`LayeredKb`] after
//! passing four checks: all IDs and property names are valid absolute IRIs
//! (structural, re-asserted on deserialized input), every referenced ID
//! resolves, all inheritance chains recursively end at the empty prototype,
//! and no ID is used twice — including IDs already defined in the basis.
//!
//! Violations are collected exhaustively rather than fail-fast, so a
//! refused build is diagnosable. Internally every input ID is resolved to
//! a dense index once, and the grounding walk runs iteratively over plain
//! arrays with memoized statuses: million-deep chains neither overflow the
//! stack nor re-traverse shared suffixes.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::index::DigestIndex;
use crate::model::{
    KbError, KnowledgeBase, LayeredKb, PrototypeDefinition, PrototypeId, StoredBaseLink,
};
use crate::wire::{self, WireError};

/// Which slot of a definition held an unresolvable reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ReferenceRole {
    Base,
    AddValue,
    RemoveValue,
}

/// Which layer already used a duplicated ID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DuplicateLayer {
    /// The ID appears twice in the supplied definitions.
    Input,
    /// The ID is already defined in the underlying basis.
    Basis,
}

/// One reason a build was refused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Violation {
    InvalidIri {
        location: String,
        iri: String,
    },
    DanglingReference {
        from: PrototypeId,
        missing: PrototypeId,
        role: ReferenceRole,
    },
    /// A minimal base-chain cycle; first and last element are the same ID.
    UngroundedInheritance { cycle: Vec<PrototypeId> },
    DuplicateId {
        id: PrototypeId,
        layer: DuplicateLayer,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidIri { location, iri } => {
                write!(f, "invalid IRI {iri:?} ({location})")
            }
            Violation::DanglingReference { from, missing, role } => {
                write!(f, "{from} references undefined {missing} as {role:?}")
            }
            Violation::UngroundedInheritance { cycle } => {
                write!(f, "inheritance never reaches the empty prototype: ")?;
                for (i, id) in cycle.iter().enumerate() {
                    if i > 0 {
                        write!(f, " -> ")?;
                    }
                    write!(f, "{id}")?;
                }
                Ok(())
            }
            Violation::DuplicateId { id, layer } => {
                write!(f, "{id} is defined twice ({layer:?} layer)")
            }
        }
    }
}

/// The full outcome of a consistency check.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_violation(&self, predicate: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(predicate)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "consistent");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Why a build did not produce a KB.
#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    /// The checks found violations; the creation is refused.
    #[error("knowledge base creation refused: {0}")]
    Inconsistent(ConsistencyReport),
    /// The basis itself failed (remote basis transport error).
    #[error("basis lookup failed: {0}")]
    Basis(#[from] KbError),
    /// A supplied document was not decodable at all.
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Builds consistent layered knowledge bases. Single-owner; not shared.
pub struct KbBuilder {
    basis: Arc<dyn KnowledgeBase>,
    definitions: Vec<PrototypeDefinition>,
    decode_violations: Vec<Violation>,
    documents_seen: usize,
    allow_basis_shadowing: bool,
}

impl KbBuilder {
    pub fn new(basis: Arc<dyn KnowledgeBase>) -> Self {
        Self {
            basis,
            definitions: Vec::new(),
            decode_violations: Vec::new(),
            documents_seen: 0,
            allow_basis_shadowing: false,
        }
    }

    pub fn over_empty() -> Self {
        Self::new(Arc::new(crate::model::EmptyKb))
    }

    /// Skip the duplicate check against the basis, shadowing its
    /// definitions instead (lookups resolve in favor of this layer). The
    /// empty prototype can never be shadowed, and duplicates within the
    /// supplied definitions are always refused.
    pub fn allow_basis_shadowing(mut self, allow: bool) -> Self {
        self.allow_basis_shadowing = allow;
        self
    }

    pub fn insert(mut self, definition: PrototypeDefinition) -> Self {
        self.definitions.push(definition);
        self
    }

    pub fn insert_all(
        mut self,
        definitions: impl IntoIterator<Item = PrototypeDefinition>,
    ) -> Self {
        self.definitions.extend(definitions);
        self
    }

    /// Decodes and inserts one wire document. An invalid IRI inside an
    /// otherwise well-formed document is recorded as a violation for the
    /// final report; undecodable documents are immediate errors.
    pub fn insert_document(mut self, doc: &[u8]) -> Result<Self, WireError> {
        self.documents_seen += 1;
        match wire::decode_definition(doc) {
            Ok(def) => self.definitions.push(def),
            Err(WireError::InvalidIri(err)) => self.decode_violations.push(Violation::InvalidIri {
                location: format!("document {}", self.documents_seen),
                iri: err.iri,
            }),
            Err(other) => return Err(other),
        }
        Ok(self)
    }

    /// Runs all checks. Returns the KB iff the report is clean, otherwise
    /// the full report.
    pub fn build(self) -> Result<LayeredKb, BuildError> {
        let mut violations = self.decode_violations;
        let basis = self.basis;
        let all: Vec<Arc<PrototypeDefinition>> =
            self.definitions.into_iter().map(Arc::new).collect();

        // Every input ID goes into a compact digest table; probes against
        // it replace per-definition hash-map traffic.
        let mut table = DigestIndex::from_ids(all.iter().map(|d| &d.id));

        // Input duplicates: later occurrences are reported and excluded.
        let duplicate_handles = table.duplicates();
        for &handle in &duplicate_handles {
            violations.push(Violation::DuplicateId {
                id: all[handle as usize].id.clone(),
                layer: DuplicateLayer::Input,
            });
        }
        table.remove_handles(&duplicate_handles);
        let alive = |handle: u32| duplicate_handles.binary_search(&handle).is_err();

        // Basis lookups can be remote; cache them, but only for targets
        // outside the layer (repeated literal values and the like).
        let mut basis_cache: HashMap<PrototypeId, bool> = HashMap::new();
        let mut in_basis = |id: &PrototypeId| -> Result<bool, KbError> {
            if let Some(&known) = basis_cache.get(id) {
                return Ok(known);
            }
            let known = basis.is_defined(id)?.is_some();
            basis_cache.insert(id.clone(), known);
            Ok(known)
        };

        let mut base_index: Vec<BaseIndex> = Vec::with_capacity(all.len());
        for (i, def) in all.iter().enumerate() {
            if !alive(i as u32) {
                // Excluded duplicate; grounded placeholder, never stored.
                base_index.push(BaseIndex::External);
                continue;
            }

            // No ID is used twice: the basis always defines the empty
            // prototype, so PROTO:P_0 is refused here even when shadowing.
            if (!self.allow_basis_shadowing || def.id.is_empty_prototype())
                && basis.is_defined(&def.id)?.is_some()
            {
                violations.push(Violation::DuplicateId {
                    id: def.id.clone(),
                    layer: DuplicateLayer::Basis,
                });
            }

            let slot = if def.base.is_empty_prototype() {
                BaseIndex::Empty
            } else if let Some(j) = table.find(&def.base) {
                BaseIndex::Layer(j)
            } else if in_basis(&def.base)? {
                BaseIndex::External
            } else {
                violations.push(Violation::DanglingReference {
                    from: def.id.clone(),
                    missing: def.base.clone(),
                    role: ReferenceRole::Base,
                });
                BaseIndex::Dangling
            };
            base_index.push(slot);

            for value in def.add.values() {
                let resolves = value.is_empty_prototype()
                    || table.find(value).is_some()
                    || in_basis(value)?;
                if !resolves {
                    violations.push(Violation::DanglingReference {
                        from: def.id.clone(),
                        missing: value.clone(),
                        role: ReferenceRole::AddValue,
                    });
                }
            }
            for value in def.remove.removal_values() {
                let resolves = value.is_empty_prototype()
                    || table.find(value).is_some()
                    || in_basis(value)?;
                if !resolves {
                    violations.push(Violation::DanglingReference {
                        from: def.id.clone(),
                        missing: value.clone(),
                        role: ReferenceRole::RemoveValue,
                    });
                }
            }
        }

        if violations.is_empty() {
            // Duplicates always refuse the build, so `all` is dense here;
            // the resolved base edges are kept for whole-KB passes.
            let walk = GroundingWalk::run(&all, base_index);
            if walk.violations.is_empty() {
                let links = walk
                    .base_index
                    .iter()
                    .map(|slot| match slot {
                        BaseIndex::Empty => StoredBaseLink::Empty,
                        BaseIndex::Layer(j) => StoredBaseLink::Stored(*j),
                        BaseIndex::External => StoredBaseLink::External,
                        BaseIndex::Dangling => unreachable!("dangling bases are violations"),
                    })
                    .collect();
                return Ok(LayeredKb::from_checked_parts(all, links, basis));
            }
            violations.extend(walk.violations);
            sort_for_stable_reports(&mut violations);
            Err(BuildError::Inconsistent(ConsistencyReport { violations }))
        } else {
            let grounding = GroundingWalk::run(&all, base_index);
            violations.extend(grounding.violations);
            sort_for_stable_reports(&mut violations);
            Err(BuildError::Inconsistent(ConsistencyReport { violations }))
        }
    }
}

/// Violations are collected in traversal order; sort them so reports are
/// deterministic.
fn sort_for_stable_reports(violations: &mut [Violation]) {
    violations.sort_by_key(|v| match v {
        Violation::InvalidIri { location, iri } => (0, location.clone(), iri.clone()),
        Violation::DanglingReference { from, missing, .. } => {
            (1, from.as_str().to_owned(), missing.as_str().to_owned())
        }
        Violation::UngroundedInheritance { cycle } => (
            2,
            cycle
                .first()
                .map(|c| c.as_str().to_owned())
                .unwrap_or_default(),
            String::new(),
        ),
        Violation::DuplicateId { id, .. } => (3, id.as_str().to_owned(), String::new()),
    });
}

/// Where a definition's base points, after one resolution pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BaseIndex {
    /// Directly the empty prototype.
    Empty,
    /// Another definition in this layer, by dense index.
    Layer(u32),
    /// Defined by the (trusted, grounded) basis.
    External,
    /// Unresolvable; already reported as a dangling reference.
    Dangling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GroundStatus {
    Unknown,
    /// Chain reaches the empty prototype (or the trusted basis).
    Grounded,
    /// Chain enters a base cycle.
    Ungrounded,
    /// Chain runs into an unresolvable base; reported as dangling.
    Blocked,
}

struct GroundingWalk {
    violations: Vec<Violation>,
    /// The base edges the walk ran over, handed back to the caller.
    base_index: Vec<BaseIndex>,
    /// Nodes whose base edge was traversed; memoization expands each node
    /// at most once.
    #[allow(dead_code)] // asserted by the memoization tests
    expanded: usize,
}

impl GroundingWalk {
    /// Iterative, array-based walk over the base graph. No call recursion
    /// and no per-step hashing: chains can be arbitrarily deep.
    fn run(ordered: &[Arc<PrototypeDefinition>], base_index: Vec<BaseIndex>) -> GroundingWalk {
        let n = ordered.len();
        let mut status = vec![GroundStatus::Unknown; n];
        // Epoch stamps replace a per-walk visited set.
        let mut seen_in_walk = vec![0u32; n];
        let mut position = vec![0u32; n];
        let mut violations = Vec::new();
        let mut expanded = 0usize;
        let mut path: Vec<u32> = Vec::new();

        for start in 0..n {
            if status[start] != GroundStatus::Unknown {
                continue;
            }
            let epoch = start as u32 + 1;
            path.clear();
            let mut cursor = start as u32;
            let outcome = loop {
                let at = cursor as usize;
                if status[at] != GroundStatus::Unknown {
                    break status[at];
                }
                if seen_in_walk[at] == epoch {
                    // Everything from the first visit of `cursor` onward
                    // forms the (minimal) cycle.
                    let from = position[at] as usize;
                    let mut cycle: Vec<PrototypeId> = path[from..]
                        .iter()
                        .map(|&i| ordered[i as usize].id.clone())
                        .collect();
                    rotate_min_first(&mut cycle);
                    cycle.push(cycle[0].clone());
                    violations.push(Violation::UngroundedInheritance { cycle });
                    break GroundStatus::Ungrounded;
                }
                seen_in_walk[at] = epoch;
                position[at] = path.len() as u32;
                path.push(cursor);
                expanded += 1;
                match base_index[at] {
                    BaseIndex::Empty | BaseIndex::External => break GroundStatus::Grounded,
                    BaseIndex::Dangling => break GroundStatus::Blocked,
                    BaseIndex::Layer(next) => cursor = next,
                }
            };
            for &i in &path {
                status[i as usize] = outcome;
            }
        }

        GroundingWalk {
            violations,
            base_index,
            expanded,
        }
    }
}

/// Rotates a cycle so the lexicographically smallest ID comes first,
/// making reports independent of discovery order.
fn rotate_min_first(cycle: &mut Vec<PrototypeId>) {
    if let Some(min_pos) = cycle
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.cmp(b))
        .map(|(i, _)| i)
    {
        cycle.rotate_left(min_pos);
    }
}

fn slots_for(
    ordered: &[Arc<PrototypeDefinition>],
    basis: &dyn KnowledgeBase,
) -> Result<Vec<BaseIndex>, KbError> {
    let table = DigestIndex::from_ids(ordered.iter().map(|d| &d.id));
    let mut slots = Vec::with_capacity(ordered.len());
    for def in ordered {
        let slot = if def.base.is_empty_prototype() {
            BaseIndex::Empty
        } else if let Some(j) = table.find(&def.base) {
            BaseIndex::Layer(j)
        } else if basis.is_defined(&def.base)?.is_some() {
            BaseIndex::External
        } else {
            BaseIndex::Dangling
        };
        slots.push(slot);
    }
    Ok(slots)
}

/// Checks only the grounded-inheritance condition over `definitions`.
/// Bases defined in the (trusted) `basis` ground their chains; the full
/// builder pipeline should be used when references may dangle.
pub fn check_grounded(
    definitions: impl IntoIterator<Item = PrototypeDefinition>,
    basis: &dyn KnowledgeBase,
) -> Result<ConsistencyReport, KbError> {
    let ordered: Vec<Arc<PrototypeDefinition>> = definitions.into_iter().map(Arc::new).collect();
    let slots = slots_for(&ordered, basis)?;
    let walk = GroundingWalk::run(&ordered, slots);
    let mut violations = walk.violations;
    sort_for_stable_reports(&mut violations);
    Ok(ConsistencyReport { violations })
}

/// Checks a definition set over a basis and returns the layered KB, or the
/// report explaining the refusal.
pub fn build_layered_kb(
    definitions: impl IntoIterator<Item = PrototypeDefinition>,
    basis: Arc<dyn KnowledgeBase>,
) -> Result<LayeredKb, BuildError> {
    KbBuilder::new(basis).insert_all(definitions).build()
}
