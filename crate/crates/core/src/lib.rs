//! Schema-graph exploration and dual-agent text-to-SQL synthesis.
//!
//! The crate is organised around the two stages of the engine:
//!
//! * **Exploration** ([`explorer`]) walks a [`schema_graph::SchemaGraph`] with a
//!   language-model policy, validates every proposed query against the live
//!   database ([`sql_exec`]) and stores the surviving
//!   (schema fragment, SQL, description) triplets in a
//!   [`knowledge_base::KnowledgeBase`].
//! * **Deployment** ([`deployment`]) answers a natural-language question by
//!   grounding it in the schema, retrieving triplets as in-context examples and
//!   iterating generate / execute / judge until a query is accepted.
//!
//! [`evalkit`] scores synthesis results against gold SQL, and
//! [`model_gateway`] hides the language-model backends (live HTTP, scripted,
//! programmatic) behind one interface.
//!
//! Vector math is generic over the floating-point scalar (see [`Scalar`]);
//! the aliases at the crate root fix it to `f32`, which is what the CLI and
//! the persisted knowledge-base files use.

pub mod deployment;
pub mod evalkit;
pub mod explorer;
pub mod fixtures;
pub mod knowledge_base;
pub mod model_gateway;
pub mod pipeline;
pub mod prompts;
pub mod scalar;
pub mod schema_graph;
pub mod sql_exec;

pub use scalar::Scalar;

/// Knowledge base at the default precision.
pub type KnowledgeBase = knowledge_base::KnowledgeBase<f32>;
/// Knowledge base at double precision.
pub type KnowledgeBase64 = knowledge_base::KnowledgeBase<f64>;
/// Exact cosine index at the default precision.
pub type VectorIndex = knowledge_base::VectorIndex<f32>;
/// Triplet at the default precision.
pub type Triplet = knowledge_base::Triplet<f32>;
/// Deterministic token-hashing embedder.
pub type HashingEmbedder = knowledge_base::HashingEmbedder;
