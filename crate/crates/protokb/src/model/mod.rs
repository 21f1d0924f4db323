//! The prototype data model: identifiers, change sets, definitions, and the
//! knowledge-base abstraction with its non-derived implementations.

mod changeset;
mod definition;
mod id;
mod kb;
pub mod literals;

pub use changeset::{apply_changeset, AddChangeSet, PropertyMap, RemoveChangeSet};
pub use definition::PrototypeDefinition;
pub use id::{PropertyId, PrototypeId, EMPTY_PROTOTYPE_IRI};
pub use kb::{ChainedKb, EmptyKb, KbError, KbResult, KnowledgeBase, LayeredKb, StoredBaseLink};
pub use literals::PredefinedKb;
