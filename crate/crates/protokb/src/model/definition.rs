//! The unit of storage and wire transfer: a prototype definition.

use std::sync::{Arc, LazyLock};

use super::changeset::{AddChangeSet, RemoveChangeSet};
use super::id::PrototypeId;

/// A prototype: its own ID, the ID of the base it derives from, and the
/// change sets applied to the inherited state (removals first, then
/// additions).
///
/// A definition whose id equals its base is representable — the consistency
/// check refuses it for everything except the empty prototype, which is the
/// unique self-based definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrototypeDefinition {
    pub id: PrototypeId,
    pub base: PrototypeId,
    pub add: AddChangeSet,
    pub remove: RemoveChangeSet,
}

static EMPTY_PROTOTYPE: LazyLock<Arc<PrototypeDefinition>> = LazyLock::new(|| {
    Arc::new(PrototypeDefinition {
        id: PrototypeId::empty(),
        base: PrototypeId::empty(),
        add: AddChangeSet::new(),
        remove: RemoveChangeSet::new(),
    })
});

impl PrototypeDefinition {
    pub fn new(
        id: PrototypeId,
        base: PrototypeId,
        add: AddChangeSet,
        remove: RemoveChangeSet,
    ) -> Self {
        Self {
            id,
            base,
            add,
            remove,
        }
    }

    /// A definition deriving from `base` with empty change sets.
    pub fn bare(id: PrototypeId, base: PrototypeId) -> Self {
        Self::new(id, base, AddChangeSet::new(), RemoveChangeSet::new())
    }

    /// The canonical definition of the empty prototype:
    /// `(PROTO:P_0, PROTO:P_0, ∅, ∅)`.
    pub fn empty_prototype() -> Arc<Self> {
        EMPTY_PROTOTYPE.clone()
    }

    /// Whether this is exactly the canonical empty-prototype definition.
    pub fn is_empty_prototype(&self) -> bool {
        self.id.is_empty_prototype()
            && self.base.is_empty_prototype()
            && self.add.is_empty()
            && self.remove.is_empty()
    }
}
