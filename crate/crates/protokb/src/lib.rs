//! Prototype-based knowledge bases.
//!
//! A knowledge base is an immutable collection of prototype definitions.
//! Each prototype names a base it derives from and change sets that add and
//! remove property values relative to that base; every consistent
//! inheritance chain ends at the distinguished empty prototype `PROTO:P_0`.
//!
//! The crate provides:
//!
//! * [`model`] — identifiers, change sets, definitions, and the
//!   [`model::KnowledgeBase`] query abstraction (empty, literal, layered,
//!   chained and remote implementations).
//! * [`engine`] — the consistency-checking builder, fixpoint
//!   (interpretation) computation with memoization, and joining of
//!   definitions retrieved from multiple sources.
//! * [`wire`] — canonical JSON serialization for client–server interchange.
//! * [`server`] — an HTTP server with gzip, `Cache-Control`, `ETag`,
//!   alternate links and batch retrieval.
//! * [`client`] — a caching remote KB client with conditional revalidation.
//! * [`bench`] — seeded synthetic dataset generators and benchmark harness.

pub mod bench;
pub mod client;
pub mod engine;
pub mod iri;
pub mod model;
pub mod server;
pub mod wire;
