//! Catalog introspection, Shared Field Group detection and the typed schema
//! graph.
//!
//! Tables with identical `name:type` field sets (time-sharded logs, hourly
//! snapshots) are linked to one canonical field group instead of repeating
//! their fields, so `N` shards of an `M`-field table cost `N + M` field edges
//! rather than `N * M`.

mod catalog;
mod graph;
mod groups;
mod signature;
mod stats;

use thiserror::Error;

pub use catalog::quote_ident;
pub use catalog::{
    catalog_to_json, introspect_catalog, introspect_connection, parse_catalog, write_catalog, CatalogDef, FieldDef,
    SchemaDef, TableDef, UNKNOWN_TYPE,
};
pub use graph::{
    build_graph, database_id, group_field_id, group_id, load_graph, schema_id, serialize_graph, table_id,
    unique_field_id, ColumnView, DatabaseNode, Edge, EdgeKind, FieldNode, FieldNodeType, GroupNode, Node, NodeKind,
    SchemaGraph, SchemaNode, TableNode, GRAPH_FILE_VERSION,
};
pub use groups::{find_candidate_groups, group_name, select_groups, CandidateGroup, SharedFieldGroup};
pub use signature::{canonical_string, generate_signature, md5_hex, SchemaSignature};
pub use stats::{graph_stats, GraphStats};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read schema source `{source_name}`: {reason}")]
    Unreachable { source_name: String, reason: String },
    #[error("malformed catalog at {location}: {message}")]
    MalformedCatalog { location: String, message: String },
    #[error("table `{0}` has no columns")]
    EmptyTable(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("signature collision on {signature} between `{first}` and `{second}`")]
    SignatureCollision { signature: String, first: String, second: String },
    #[error("group references unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown graph node `{0}`")]
    UnknownNode(String),
    #[error("graph file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt graph: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Introspection, grouping and graph construction in one call.
pub fn ingest(source: &str) -> Result<SchemaGraph, GraphError> {
    let catalog = introspect_catalog(source)?;
    graph_from_catalog(&catalog)
}

pub fn graph_from_catalog(catalog: &CatalogDef) -> Result<SchemaGraph, GraphError> {
    catalog.validate()?;
    let candidates = find_candidate_groups(catalog)?;
    let groups = select_groups(&candidates);
    build_graph(catalog, &groups)
}
