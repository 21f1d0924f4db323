//! The knowledge-base query abstraction and its non-derived implementations.
//!
//! A knowledge base is an immutable, queryable collection of prototype
//! definitions. The one required operation is [`KnowledgeBase::is_defined`];
//! every implementation reports the empty prototype as defined. Absence is
//! a value (`Ok(None)`), not an error — the fallible return type exists for
//! network-backed implementations, and local stores never fail.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use super::definition::PrototypeDefinition;
use super::id::PrototypeId;

/// Error surfaced by fallible (remote) knowledge bases.
#[derive(Debug, thiserror::Error)]
#[error(transparent)]
pub struct KbError(#[from] pub Box<dyn std::error::Error + Send + Sync + 'static>);

impl KbError {
    pub fn new(err: impl std::error::Error + Send + Sync + 'static) -> Self {
        Self(Box::new(err))
    }
}

pub type KbResult<T> = Result<T, KbError>;

/// Where a stored definition's base points, aligned with the order of
/// [`KnowledgeBase::stored_definitions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoredBaseLink {
    /// Directly the empty prototype.
    Empty,
    /// The stored definition at this position.
    Stored(u32),
    /// Defined outside the stored set (a basis or literal prototype).
    External,
}

/// An immutable, queryable collection of prototype definitions.
///
/// Repeated `is_defined` calls with the same ID return identical results
/// for the lifetime of the instance, so instances are freely shared across
/// concurrent readers.
pub trait KnowledgeBase: Send + Sync {
    /// Returns the definition of `id` if it is defined here (including any
    /// underlying basis), `None` otherwise.
    fn is_defined(&self, id: &PrototypeId) -> KbResult<Option<Arc<PrototypeDefinition>>>;

    /// IDs of definitions explicitly stored in this KB — not the implicit
    /// empty prototype and not pattern-recognized literals. `None` when the
    /// definition space cannot be enumerated (remote or literal KBs).
    fn stored_ids(&self) -> Option<Box<dyn Iterator<Item = PrototypeId> + '_>> {
        None
    }

    /// The stored definitions themselves, when enumerable. Same coverage
    /// as [`stored_ids`](Self::stored_ids).
    fn stored_definitions(&self) -> Option<Box<dyn Iterator<Item = Arc<PrototypeDefinition>> + '_>> {
        None
    }

    /// Pre-resolved base edges aligned with
    /// [`stored_definitions`](Self::stored_definitions), when the
    /// implementation kept them from its consistency check. Purely an
    /// acceleration for whole-KB passes.
    fn stored_base_links(&self) -> Option<&[StoredBaseLink]> {
        None
    }
}

/// A KB without any content. Still defines the empty prototype.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyKb;

impl KnowledgeBase for EmptyKb {
    fn is_defined(&self, id: &PrototypeId) -> KbResult<Option<Arc<PrototypeDefinition>>> {
        Ok(id
            .is_empty_prototype()
            .then(PrototypeDefinition::empty_prototype))
    }

    fn stored_ids(&self) -> Option<Box<dyn Iterator<Item = PrototypeId> + '_>> {
        Some(Box::new(std::iter::empty()))
    }

    fn stored_definitions(
        &self,
    ) -> Option<Box<dyn Iterator<Item = Arc<PrototypeDefinition>> + '_>> {
        Some(Box::new(std::iter::empty()))
    }
}

/// Stores prototype definitions over an underlying basis KB.
///
/// Own definitions are consulted first; the basis is queried when a lookup
/// misses locally. Instances are produced by the consistency-checking
/// builder in the engine — there is no public constructor that bypasses
/// the checks.
pub struct LayeredKb {
    /// Dense definition store; the ID index over it is built on first
    /// lookup (batch passes like interpretation never need it).
    definitions: Vec<Arc<PrototypeDefinition>>,
    /// Base edges resolved during the consistency check.
    base_links: Vec<StoredBaseLink>,
    index: OnceLock<HashMap<PrototypeId, u32>>,
    basis: Arc<dyn KnowledgeBase>,
}

impl LayeredKb {
    pub(crate) fn from_checked_parts(
        definitions: Vec<Arc<PrototypeDefinition>>,
        base_links: Vec<StoredBaseLink>,
        basis: Arc<dyn KnowledgeBase>,
    ) -> Self {
        debug_assert_eq!(definitions.len(), base_links.len());
        Self {
            definitions,
            base_links,
            index: OnceLock::new(),
            basis,
        }
    }

    /// Whether the basis stores nothing of its own (it may still define
    /// the empty prototype and literals).
    fn basis_stores_nothing(&self) -> bool {
        self.basis
            .stored_ids()
            .map(|mut ids| ids.next().is_none())
            .unwrap_or(false)
    }

    /// Number of definitions stored in this layer (basis excluded).
    pub fn layer_len(&self) -> usize {
        self.definitions.len()
    }

    pub fn basis(&self) -> &Arc<dyn KnowledgeBase> {
        &self.basis
    }

    fn index(&self) -> &HashMap<PrototypeId, u32> {
        self.index.get_or_init(|| {
            self.definitions
                .iter()
                .enumerate()
                .map(|(i, def)| (def.id.clone(), i as u32))
                .collect()
        })
    }
}

impl KnowledgeBase for LayeredKb {
    fn is_defined(&self, id: &PrototypeId) -> KbResult<Option<Arc<PrototypeDefinition>>> {
        match self.index().get(id) {
            Some(&i) => Ok(Some(self.definitions[i as usize].clone())),
            None => self.basis.is_defined(id),
        }
    }

    fn stored_ids(&self) -> Option<Box<dyn Iterator<Item = PrototypeId> + '_>> {
        let basis_ids = self.basis.stored_ids()?;
        Some(Box::new(
            self.definitions.iter().map(|d| d.id.clone()).chain(basis_ids),
        ))
    }

    fn stored_definitions(
        &self,
    ) -> Option<Box<dyn Iterator<Item = Arc<PrototypeDefinition>> + '_>> {
        let basis_defs = self.basis.stored_definitions()?;
        Some(Box::new(self.definitions.iter().cloned().chain(basis_defs)))
    }

    fn stored_base_links(&self) -> Option<&[StoredBaseLink]> {
        // Valid only when this layer is the whole stored set; a storing
        // basis would extend the enumeration past these links.
        self.basis_stores_nothing().then_some(&self.base_links)
    }
}

/// Connects multiple KBs; members are checked in turn until one defines the
/// requested prototype. Duplicates across members resolve in favor of the
/// earliest member.
pub struct ChainedKb {
    members: Vec<Arc<dyn KnowledgeBase>>,
}

impl ChainedKb {
    pub fn new(members: Vec<Arc<dyn KnowledgeBase>>) -> Self {
        Self { members }
    }

    pub fn members(&self) -> &[Arc<dyn KnowledgeBase>] {
        &self.members
    }
}

impl KnowledgeBase for ChainedKb {
    fn is_defined(&self, id: &PrototypeId) -> KbResult<Option<Arc<PrototypeDefinition>>> {
        for member in &self.members {
            if let Some(def) = member.is_defined(id)? {
                return Ok(Some(def));
            }
        }
        // Even an empty chain contains the empty prototype.
        Ok(id
            .is_empty_prototype()
            .then(PrototypeDefinition::empty_prototype))
    }

    fn stored_ids(&self) -> Option<Box<dyn Iterator<Item = PrototypeId> + '_>> {
        let mut iters = Vec::with_capacity(self.members.len());
        for member in &self.members {
            iters.push(member.stored_ids()?);
        }
        Some(Box::new(iters.into_iter().flatten()))
    }

    fn stored_definitions(
        &self,
    ) -> Option<Box<dyn Iterator<Item = Arc<PrototypeDefinition>> + '_>> {
        let mut iters = Vec::with_capacity(self.members.len());
        for member in &self.members {
            iters.push(member.stored_definitions()?);
        }
        Some(Box::new(iters.into_iter().flatten()))
    }
}

impl<K: KnowledgeBase + ?Sized> KnowledgeBase for Arc<K> {
    fn is_defined(&self, id: &PrototypeId) -> KbResult<Option<Arc<PrototypeDefinition>>> {
        (**self).is_defined(id)
    }

    fn stored_ids(&self) -> Option<Box<dyn Iterator<Item = PrototypeId> + '_>> {
        (**self).stored_ids()
    }

    fn stored_definitions(
        &self,
    ) -> Option<Box<dyn Iterator<Item = Arc<PrototypeDefinition>> + '_>> {
        (**self).stored_definitions()
    }
}
