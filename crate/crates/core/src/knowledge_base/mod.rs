//! Triplet store and schema-column documents with exact cosine retrieval.
//!
//! Two indexes live side by side: column documents (one per column of the
//! schema graph, rendered with [`render_column_document`]) for schema
//! grounding, and triplets keyed by the embedding of their SQL for
//! in-context example retrieval.

mod document;
mod embed;
mod index;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{parse_column_document, render_column_document};
pub use embed::{Embedder, HashingEmbedder, LiveEmbedder, HASHING_DIMENSION};
pub use index::VectorIndex;
pub use store::{load_kb, load_triplets, persist_kb, serialize_triplets};

use crate::model_gateway::GatewayError;
use crate::schema_graph::{Node, SchemaGraph};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("vector has dimension {found}, index expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("knowledge base line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("invalid triplet `{id}`: {message}")]
    InvalidTriplet { id: String, message: String },
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The schema sub-structure a triplet's SQL touches. All names are fully
/// qualified (`db.schema.table`, `db.schema.table.column`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFragment {
    pub tables: Vec<String>,
    pub columns: Vec<String>,
    pub joins: Vec<(String, String)>,
    pub groups: Vec<String>,
}

impl SchemaFragment {
    /// Every column and join endpoint belongs to a listed table.
    pub fn validate(&self) -> Result<(), String> {
        let owned =
            |col: &str| self.tables.iter().any(|t| col.strip_prefix(t.as_str()).is_some_and(|r| r.starts_with('.')));
        if let Some(c) = self.columns.iter().find(|c| !owned(c)) {
            return Err(format!("column `{c}` belongs to no listed table"));
        }
        for (l, r) in &self.joins {
            if !self.columns.contains(l) || !self.columns.contains(r) {
                return Err(format!("join `{l} = {r}` references a column outside the fragment"));
            }
        }
        Ok(())
    }
}

/// Where a triplet came from: the exploration node that produced it, the
/// node ids on its root path, and the iteration number (a logical clock, so
/// reruns serialize identically).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub node: usize,
    pub path: Vec<usize>,
    pub iteration: u64,
}

/// (schema fragment, SQL, description) plus the embedding of the SQL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Triplet<F> {
    pub id: String,
    pub fragment: SchemaFragment,
    pub sql: String,
    pub description: String,
    pub embedding: Vec<F>,
    pub provenance: Provenance,
}

/// One column of the schema as retrievable text.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDocument<F> {
    /// `db.schema.table.column`
    pub id: String,
    pub table: String,
    pub column: String,
    pub text: String,
    pub embedding: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase<F> {
    triplets: Vec<Triplet<F>>,
    by_id: BTreeMap<String, usize>,
    triplet_index: VectorIndex<F>,
    columns: Vec<ColumnDocument<F>>,
    column_by_id: BTreeMap<String, usize>,
    column_index: VectorIndex<F>,
}

impl<F: Scalar> KnowledgeBase<F> {
    pub fn new(dimension: usize) -> Self {
        KnowledgeBase {
            triplets: Vec::new(),
            by_id: BTreeMap::new(),
            triplet_index: VectorIndex::new(dimension),
            columns: Vec::new(),
            column_by_id: BTreeMap::new(),
            column_index: VectorIndex::new(dimension),
        }
    }

    pub fn dimension(&self) -> usize {
        self.triplet_index.dimension()
    }

    pub fn triplets(&self) -> &[Triplet<F>] {
        &self.triplets
    }

    pub fn triplet(&self, id: &str) -> Option<&Triplet<F>> {
        self.by_id.get(id).map(|&i| &self.triplets[i])
    }

    pub fn find_by_sql(&self, sql: &str) -> Option<&Triplet<F>> {
        self.triplets.iter().find(|t| t.sql == sql)
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn insert_triplet(&mut self, triplet: Triplet<F>) -> Result<(), KbError> {
        if triplet.sql.trim().is_empty() {
            return Err(KbError::InvalidTriplet { id: triplet.id, message: "empty SQL".into() });
        }
        self.triplet_index.insert(triplet.id.clone(), triplet.embedding.clone())?;
        self.by_id.insert(triplet.id.clone(), self.triplets.len());
        self.triplets.push(triplet);
        Ok(())
    }

    pub fn columns(&self) -> &[ColumnDocument<F>] {
        &self.columns
    }

    pub fn column(&self, id: &str) -> Option<&ColumnDocument<F>> {
        self.column_by_id.get(id).map(|&i| &self.columns[i])
    }

    pub fn insert_column(&mut self, doc: ColumnDocument<F>) -> Result<(), KbError> {
        self.column_index.insert(doc.id.clone(), doc.embedding.clone())?;
        self.column_by_id.insert(doc.id.clone(), self.columns.len());
        self.columns.push(doc);
        Ok(())
    }

    /// Adds one document per field node of `graph`. A grouped field is filed
    /// under the first member table of its group, so shards contribute one
    /// document per column rather than one per shard.
    pub fn index_schema(&mut self, graph: &SchemaGraph, embedder: &dyn Embedder<F>) -> Result<(), KbError> {
        let mut seen_groups = std::collections::BTreeSet::new();
        for (_, table) in graph.tables() {
            if let Some(gid) = graph.group_of(&table.fullname) {
                if !seen_groups.insert(gid.to_string()) {
                    continue;
                }
            }
            for view in graph.columns(&table.fullname) {
                let f = view.field;
                let text = render_column_document(&f.name, &f.data_type, f.description.as_deref());
                let embedding = embedder.embed(&text)?;
                self.insert_column(ColumnDocument {
                    id: format!("{}.{}", table.fullname, f.name),
                    table: table.fullname.clone(),
                    column: f.name.clone(),
                    text,
                    embedding,
                })?;
            }
        }
        debug_assert!(graph.nodes().values().filter(|n| matches!(n, Node::Field(_))).count() >= self.columns.len());
        Ok(())
    }

    /// Top-k column documents for `query` with their scores.
    pub fn retrieve_columns(&self, query: &[F], k: usize) -> Vec<(&ColumnDocument<F>, F)> {
        self.column_index
            .search(query, k)
            .into_iter()
            .map(|(id, s)| (&self.columns[self.column_by_id[&id]], s))
            .collect()
    }

    /// Top-k triplets for `query` with their scores.
    pub fn retrieve_triplets(&self, query: &[F], k: usize) -> Vec<(&Triplet<F>, F)> {
        self.triplet_index.search(query, k).into_iter().map(|(id, s)| (&self.triplets[self.by_id[&id]], s)).collect()
    }
}

/// Top-k column documents for a question, embedded with `embedder`.
pub fn retrieve_columns<'k, F: Scalar>(
    question: &str,
    kb: &'k KnowledgeBase<F>,
    embedder: &dyn Embedder<F>,
    k: usize,
) -> Result<Vec<(&'k ColumnDocument<F>, F)>, KbError> {
    Ok(kb.retrieve_columns(&embedder.embed(question)?, k))
}

/// Top-k triplets for a question, embedded with `embedder`.
pub fn retrieve_triplets<'k, F: Scalar>(
    question: &str,
    kb: &'k KnowledgeBase<F>,
    embedder: &dyn Embedder<F>,
    k: usize,
) -> Result<Vec<(&'k Triplet<F>, F)>, KbError> {
    Ok(kb.retrieve_triplets(&embedder.embed(question)?, k))
}
