//! Building consistent knowledge bases, computing fixpoints, and joining
//! definitions from multiple sources.

mod consistency;
mod fixpoint;
mod index;
mod join;

pub use consistency::{
    build_layered_kb, check_grounded, BuildError, ConsistencyReport, DuplicateLayer, KbBuilder,
    ReferenceRole, Violation,
};
pub use fixpoint::{
    compute_fixpoint, compute_interpretation, compute_interpretation_with, EngineError,
    FixpointCache, FixpointDefinition,
};
pub use join::{join_definitions, JoinError, JoinStrategy, SourceTag};
