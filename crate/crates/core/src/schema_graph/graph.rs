use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::groups::group_name;
use super::{CatalogDef, FieldDef, GraphError, SchemaSignature, SharedFieldGroup};

pub const GRAPH_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    HasSchema,
    HasTable,
    UsesFieldGroup,
    HasUniqueField,
    HasField,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 5] = [
        EdgeKind::HasSchema,
        EdgeKind::HasTable,
        EdgeKind::UsesFieldGroup,
        EdgeKind::HasUniqueField,
        EdgeKind::HasField,
    ];

    /// Allowed (start, end) node kinds.
    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::HasSchema => (NodeKind::Database, NodeKind::Schema),
            EdgeKind::HasTable => (NodeKind::Schema, NodeKind::Table),
            EdgeKind::UsesFieldGroup => (NodeKind::Table, NodeKind::SharedFieldGroup),
            EdgeKind::HasUniqueField => (NodeKind::Table, NodeKind::Field),
            EdgeKind::HasField => (NodeKind::SharedFieldGroup, NodeKind::Field),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::HasSchema => "HAS_SCHEMA",
            EdgeKind::HasTable => "HAS_TABLE",
            EdgeKind::UsesFieldGroup => "USES_FIELD_GROUP",
            EdgeKind::HasUniqueField => "HAS_UNIQUE_FIELD",
            EdgeKind::HasField => "HAS_FIELD",
        }
    }

    pub fn is_field_related(self) -> bool {
        matches!(self, EdgeKind::UsesFieldGroup | EdgeKind::HasUniqueField | EdgeKind::HasField)
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Database,
    Schema,
    Table,
    SharedFieldGroup,
    Field,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] =
        [NodeKind::Database, NodeKind::Schema, NodeKind::Table, NodeKind::SharedFieldGroup, NodeKind::Field];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Database => "database",
            NodeKind::Schema => "schema",
            NodeKind::Table => "table",
            NodeKind::SharedFieldGroup => "shared_field_group",
            NodeKind::Field => "field",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseNode {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaNode {
    pub database: String,
    pub name: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableNode {
    pub database: String,
    pub schema: String,
    pub name: String,
    pub fullname: String,
    pub ddl_summary: Option<String>,
}

impl TableNode {
    /// Name to use inside SQL text against the embedded engine.
    pub fn sql_name(&self) -> String {
        if self.schema == "main" {
            self.name.clone()
        } else {
            format!("{}.{}", self.schema, self.name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupNode {
    pub database: String,
    pub schema: String,
    pub name: String,
    pub description: String,
    pub field_count: usize,
    pub field_hash: SchemaSignature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldNodeType {
    UniqueField,
    GroupField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldNode {
    pub database: String,
    pub schema: String,
    /// Parent table for unique fields.
    pub table: Option<String>,
    pub name: String,
    #[serde(rename = "type")]
    pub data_type: String,
    pub description: Option<String>,
    pub sample_data: Option<Vec<String>>,
    pub node_type: FieldNodeType,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub key: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<String>,
}

impl FieldNode {
    pub fn to_field_def(&self) -> FieldDef {
        FieldDef {
            name: self.name.clone(),
            data_type: self.data_type.clone(),
            description: self.description.clone(),
            sample_values: self.sample_data.clone(),
            key: self.key,
            references: self.references.clone(),
        }
    }

    pub fn has_documentation(&self) -> bool {
        self.description.as_deref().is_some_and(|d| !d.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Database(DatabaseNode),
    Schema(SchemaNode),
    Table(TableNode),
    SharedFieldGroup(GroupNode),
    Field(FieldNode),
}

impl Node {
    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Database(_) => NodeKind::Database,
            Node::Schema(_) => NodeKind::Schema,
            Node::Table(_) => NodeKind::Table,
            Node::SharedFieldGroup(_) => NodeKind::SharedFieldGroup,
            Node::Field(_) => NodeKind::Field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub kind: EdgeKind,
    pub to: String,
}

pub fn database_id(name: &str) -> String {
    format!("database:{name}")
}
pub fn schema_id(database: &str, schema: &str) -> String {
    format!("schema:{database}.{schema}")
}
pub fn table_id(table_fqn: &str) -> String {
    format!("table:{table_fqn}")
}
pub fn group_id(signature: &SchemaSignature) -> String {
    format!("group:{signature}")
}
pub fn unique_field_id(table_fqn: &str, column: &str) -> String {
    format!("field:{table_fqn}.{column}")
}
pub fn group_field_id(signature: &SchemaSignature, column: &str) -> String {
    format!("field:{}.{column}", group_name_full(signature))
}
fn group_name_full(signature: &SchemaSignature) -> String {
    format!("FieldGroup_{signature}")
}

/// Lookup tables derived from nodes and edges; rebuilt after load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct GraphIndex {
    /// table fqn -> table node id
    tables: BTreeMap<String, String>,
    table_group: BTreeMap<String, String>,
    table_fields: BTreeMap<String, Vec<String>>,
    group_fields: BTreeMap<String, Vec<String>>,
    group_members: BTreeMap<String, Vec<String>>,
    /// bare table name -> table node ids with that name
    by_name: BTreeMap<String, Vec<String>>,
}

/// Typed node/edge graph of one database's schema.
///
/// Node ids are content-derived (`table:db.schema.t`, `group:<signature>`,
/// ...), so two builds of the same catalog serialize identically. Feedback
/// maps node ids to the triplet ids recorded against them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaGraph {
    pub database: String,
    nodes: BTreeMap<String, Node>,
    edges: Vec<Edge>,
    feedback: BTreeMap<String, Vec<String>>,
    index: GraphIndex,
}

/// A column as seen through a concrete table: unique fields resolve to their
/// own node, grouped fields to the group's shared node.
#[derive(Debug, Clone, Copy)]
pub struct ColumnView<'g> {
    pub table_id: &'g str,
    pub table: &'g TableNode,
    pub field_id: &'g str,
    pub field: &'g FieldNode,
}

impl SchemaGraph {
    fn empty(database: &str) -> Self {
        SchemaGraph {
            database: database.to_string(),
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            feedback: BTreeMap::new(),
            index: GraphIndex::default(),
        }
    }

    /// A graph holding only the database node.
    pub fn database_only(database: &str) -> Self {
        let mut g = Self::empty(database);
        g.nodes.insert(database_id(database), Node::Database(DatabaseNode { name: database.to_string() }));
        g
    }

    pub fn nodes(&self) -> &BTreeMap<String, Node> {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn feedback(&self) -> &BTreeMap<String, Vec<String>> {
        &self.feedback
    }

    pub fn feedback_for(&self, node_id: &str) -> &[String] {
        self.feedback.get(node_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Appends a triplet id to a node's feedback list. Duplicate ids are
    /// ignored.
    pub fn record_feedback(&mut self, node_id: &str, triplet_id: &str) -> Result<(), GraphError> {
        if !self.nodes.contains_key(node_id) {
            return Err(GraphError::UnknownNode(node_id.to_string()));
        }
        let list = self.feedback.entry(node_id.to_string()).or_default();
        if !list.iter().any(|t| t == triplet_id) {
            list.push(triplet_id.to_string());
        }
        Ok(())
    }

    /// Table nodes keyed by fully-qualified name, in lexicographic order.
    pub fn tables(&self) -> impl Iterator<Item = (&str, &TableNode)> {
        self.index.tables.values().filter_map(|id| match self.nodes.get(id) {
            Some(Node::Table(t)) => Some((id.as_str(), t)),
            _ => None,
        })
    }

    pub fn table(&self, table_fqn: &str) -> Option<&TableNode> {
        match self.nodes.get(&table_id(table_fqn)) {
            Some(Node::Table(t)) => Some(t),
            _ => None,
        }
    }

    pub fn field(&self, field_id: &str) -> Option<&FieldNode> {
        match self.nodes.get(field_id) {
            Some(Node::Field(f)) => Some(f),
            _ => None,
        }
    }

    /// Group node id of a table, if it belongs to one.
    pub fn group_of(&self, table_fqn: &str) -> Option<&str> {
        self.index.table_group.get(&table_id(table_fqn)).map(String::as_str)
    }

    pub fn group(&self, group_id: &str) -> Option<&GroupNode> {
        match self.nodes.get(group_id) {
            Some(Node::SharedFieldGroup(g)) => Some(g),
            _ => None,
        }
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &GroupNode)> {
        self.nodes.iter().filter_map(|(id, n)| match n {
            Node::SharedFieldGroup(g) => Some((id.as_str(), g)),
            _ => None,
        })
    }

    /// Member table fqns of a group, lexicographic.
    pub fn group_members(&self, group_id: &str) -> Vec<&str> {
        self.index
            .group_members
            .get(group_id)
            .map(|ids| ids.iter().filter_map(|id| id.strip_prefix("table:")).collect())
            .unwrap_or_default()
    }

    /// Columns of a table in declaration order.
    pub fn columns(&self, table_fqn: &str) -> Vec<ColumnView<'_>> {
        let tid = table_id(table_fqn);
        let Some((table_id, Node::Table(table))) = self.nodes.get_key_value(&tid) else {
            return Vec::new();
        };
        let field_ids = match self.index.table_group.get(&tid) {
            Some(gid) => self.index.group_fields.get(gid),
            None => self.index.table_fields.get(&tid),
        };
        field_ids
            .into_iter()
            .flatten()
            .filter_map(|fid| {
                let (field_id, node) = self.nodes.get_key_value(fid)?;
                match node {
                    Node::Field(field) => Some(ColumnView { table_id, table, field_id, field }),
                    _ => None,
                }
            })
            .collect()
    }

    pub fn column(&self, table_fqn: &str, column: &str) -> Option<ColumnView<'_>> {
        self.columns(table_fqn).into_iter().find(|c| c.field.name == column)
    }

    /// Field node id that backs `table.column`.
    pub fn field_id_for(&self, table_fqn: &str, column: &str) -> Option<String> {
        self.column(table_fqn, column).map(|c| c.field_id.to_string())
    }

    /// Shortest name that identifies the table uniquely in this graph:
    /// `table`, then `schema.table`, then the full name.
    pub fn short_table_name(&self, table_fqn: &str) -> String {
        let Some(t) = self.table(table_fqn) else { return table_fqn.to_string() };
        if self.index.by_name.get(&t.name).is_some_and(|ids| ids.len() == 1) {
            return t.name.clone();
        }
        let with_schema = format!("{}.{}", t.schema, t.name);
        let clashes = self.tables().filter(|(_, other)| other.schema == t.schema && other.name == t.name).count();
        if clashes == 1 {
            with_schema
        } else {
            table_fqn.to_string()
        }
    }

    /// Resolves a table reference given as `table`, `schema.table` or the
    /// full name. Case-insensitive on the bare name when unambiguous.
    pub fn resolve_table(&self, reference: &str) -> Option<String> {
        let reference = reference.trim().trim_matches(|c| c == '"' || c == '`');
        if self.table(reference).is_some() {
            return Some(reference.to_string());
        }
        let qualified = format!("{}.{}", self.database, reference);
        if self.table(&qualified).is_some() {
            return Some(qualified);
        }
        let lower = reference.to_ascii_lowercase();
        let hits: Vec<&str> = self
            .tables()
            .filter(|(_, t)| t.name == reference || t.name.to_ascii_lowercase() == lower)
            .map(|(id, _)| id.strip_prefix("table:").unwrap_or(id))
            .collect();
        (hits.len() == 1).then(|| hits[0].to_string())
    }

    /// Resolves `table.column` (any table form accepted by
    /// [`resolve_table`](Self::resolve_table)) to `(table_fqn, column)`.
    pub fn resolve_column(&self, reference: &str) -> Option<(String, String)> {
        let reference = reference.trim();
        let (table_part, column) = reference.rsplit_once('.')?;
        let table = self.resolve_table(table_part)?;
        let view = self
            .column(&table, column)
            .or_else(|| self.columns(&table).into_iter().find(|c| c.field.name.eq_ignore_ascii_case(column)))?;
        Some((table, view.field.name.clone()))
    }

    fn reindex(&mut self) {
        let mut index = GraphIndex::default();
        for (id, node) in &self.nodes {
            if let Node::Table(t) = node {
                index.tables.insert(t.fullname.clone(), id.clone());
                index.by_name.entry(t.name.clone()).or_default().push(id.clone());
            }
        }
        for e in &self.edges {
            match e.kind {
                EdgeKind::UsesFieldGroup => {
                    index.table_group.insert(e.from.clone(), e.to.clone());
                    index.group_members.entry(e.to.clone()).or_default().push(e.from.clone());
                }
                EdgeKind::HasUniqueField => index.table_fields.entry(e.from.clone()).or_default().push(e.to.clone()),
                EdgeKind::HasField => index.group_fields.entry(e.from.clone()).or_default().push(e.to.clone()),
                _ => {}
            }
        }
        for members in index.group_members.values_mut() {
            members.sort();
        }
        self.index = index;
    }

    /// Checks edge endpoints, edge kinds and field reachability.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut field_parents: BTreeMap<&str, usize> = BTreeMap::new();
        let mut table_links: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for e in &self.edges {
            let (from, to) = match (self.nodes.get(&e.from), self.nodes.get(&e.to)) {
                (Some(f), Some(t)) => (f, t),
                _ => {
                    return Err(GraphError::Corrupt(format!(
                        "edge {} -{}-> {} has a missing endpoint",
                        e.from, e.kind, e.to
                    )))
                }
            };
            if (from.kind(), to.kind()) != e.kind.endpoints() {
                return Err(GraphError::Corrupt(format!(
                    "edge {} joins {} to {}",
                    e.kind,
                    from.kind().as_str(),
                    to.kind().as_str()
                )));
            }
            match e.kind {
                EdgeKind::HasUniqueField | EdgeKind::HasField => *field_parents.entry(e.to.as_str()).or_default() += 1,
                _ => {}
            }
            match e.kind {
                EdgeKind::UsesFieldGroup => table_links.entry(e.from.as_str()).or_default().0 += 1,
                EdgeKind::HasUniqueField => table_links.entry(e.from.as_str()).or_default().1 += 1,
                _ => {}
            }
        }
        for (id, node) in &self.nodes {
            if matches!(node, Node::Field(_)) && field_parents.get(id.as_str()) != Some(&1) {
                return Err(GraphError::Corrupt(format!("field {id} must have exactly one parent")));
            }
        }
        for (table, (groups, uniques)) in table_links {
            if groups > 1 || (groups == 1 && uniques > 0) {
                return Err(GraphError::Corrupt(format!("table {table} mixes group and unique field links")));
            }
        }
        for id in self.feedback.keys() {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::Corrupt(format!("feedback references unknown node {id}")));
            }
        }
        Ok(())
    }
}

/// Builds the graph for `catalog` using the selected groups.
pub fn build_graph(catalog: &CatalogDef, groups: &[SharedFieldGroup]) -> Result<SchemaGraph, GraphError> {
    let db = &catalog.database_name;
    let mut g = SchemaGraph::database_only(db);
    let db_id = database_id(db);

    let tables: BTreeMap<String, &super::TableDef> = catalog.tables().map(|t| (t.fqn(), t)).collect();
    let mut membership: BTreeMap<&str, &SharedFieldGroup> = BTreeMap::new();
    for group in groups {
        for member in &group.member_tables {
            if !tables.contains_key(member) {
                return Err(GraphError::UnknownTable(member.clone()));
            }
            if membership.insert(member.as_str(), group).is_some() {
                return Err(GraphError::InvalidCatalog(format!("table {member} appears in two groups")));
            }
        }
    }

    for schema in &catalog.schemas {
        let sid = schema_id(db, &schema.name);
        g.nodes.insert(
            sid.clone(),
            Node::Schema(SchemaNode {
                database: db.clone(),
                name: schema.name.clone(),
                description: schema.description.clone(),
            }),
        );
        g.edges.push(Edge { from: db_id.clone(), kind: EdgeKind::HasSchema, to: sid.clone() });
        for table in &schema.tables {
            let fqn = table.fqn();
            let tid = table_id(&fqn);
            g.nodes.insert(
                tid.clone(),
                Node::Table(TableNode {
                    database: db.clone(),
                    schema: schema.name.clone(),
                    name: table.name.clone(),
                    fullname: fqn.clone(),
                    ddl_summary: table.ddl_summary.clone(),
                }),
            );
            g.edges.push(Edge { from: sid.clone(), kind: EdgeKind::HasTable, to: tid.clone() });
            match membership.get(fqn.as_str()) {
                Some(group) => {
                    g.edges.push(Edge { from: tid, kind: EdgeKind::UsesFieldGroup, to: group_id(&group.signature) });
                }
                None => {
                    for field in &table.fields {
                        let fid = unique_field_id(&fqn, &field.name);
                        g.nodes.insert(
                            fid.clone(),
                            Node::Field(field_node(
                                db,
                                &schema.name,
                                Some(&table.name),
                                field,
                                FieldNodeType::UniqueField,
                            )),
                        );
                        g.edges.push(Edge { from: tid.clone(), kind: EdgeKind::HasUniqueField, to: fid });
                    }
                }
            }
        }
    }

    for group in groups {
        let gid = group_id(&group.signature);
        let first = tables[&group.member_tables[0]];
        g.nodes.insert(
            gid.clone(),
            Node::SharedFieldGroup(GroupNode {
                database: db.clone(),
                schema: first.schema_name.clone(),
                name: group_name(&group.signature),
                description: group_name_full(&group.signature),
                field_count: group.field_count,
                field_hash: group.signature.clone(),
            }),
        );
        for field in &group.fields {
            let fid = group_field_id(&group.signature, &field.name);
            g.nodes.insert(
                fid.clone(),
                Node::Field(field_node(db, &first.schema_name, None, field, FieldNodeType::GroupField)),
            );
            g.edges.push(Edge { from: gid.clone(), kind: EdgeKind::HasField, to: fid });
        }
    }

    g.reindex();
    g.validate()?;
    Ok(g)
}

fn field_node(db: &str, schema: &str, table: Option<&str>, field: &FieldDef, node_type: FieldNodeType) -> FieldNode {
    FieldNode {
        database: db.to_string(),
        schema: schema.to_string(),
        table: table.map(str::to_string),
        name: field.name.clone(),
        data_type: field.data_type.clone(),
        description: field.description.clone(),
        sample_data: field.sample_values.clone(),
        node_type,
        key: field.key,
        references: field.references.clone(),
    }
}

// ---------------------------------------------------------------------------
// Graph file

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: u32,
    database: String,
    nodes: Vec<NodeRecord>,
    edges: Vec<Edge>,
    feedback: Vec<FeedbackRecord>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    #[serde(flatten)]
    node: Node,
}

#[derive(Serialize, Deserialize)]
struct FeedbackRecord {
    node: String,
    triplets: Vec<String>,
}

pub fn serialize_graph(graph: &SchemaGraph) -> Vec<u8> {
    let file = GraphFile {
        version: GRAPH_FILE_VERSION,
        database: graph.database.clone(),
        nodes: graph.nodes.iter().map(|(id, node)| NodeRecord { id: id.clone(), node: node.clone() }).collect(),
        edges: graph.edges.clone(),
        feedback: graph
            .feedback
            .iter()
            .map(|(node, triplets)| FeedbackRecord { node: node.clone(), triplets: triplets.clone() })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("graph serializes");
    out.push(b'\n');
    out
}

pub fn load_graph(bytes: &[u8]) -> Result<SchemaGraph, GraphError> {
    #[derive(Deserialize)]
    struct VersionProbe {
        version: u32,
    }
    let probe: VersionProbe =
        serde_json::from_slice(bytes).map_err(|e| GraphError::Corrupt(format!("graph file: {e}")))?;
    if probe.version != GRAPH_FILE_VERSION {
        return Err(GraphError::VersionMismatch { found: probe.version, expected: GRAPH_FILE_VERSION });
    }
    let file: GraphFile = serde_json::from_slice(bytes).map_err(|e| GraphError::Corrupt(format!("graph file: {e}")))?;
    let mut graph = SchemaGraph::empty(&file.database);
    for record in file.nodes {
        if graph.nodes.insert(record.id.clone(), record.node).is_some() {
            return Err(GraphError::Corrupt(format!("duplicate node id {}", record.id)));
        }
    }
    graph.edges = file.edges;
    let mut seen = BTreeSet::new();
    for fb in file.feedback {
        if !seen.insert(fb.node.clone()) {
            return Err(GraphError::Corrupt(format!("duplicate feedback entry for {}", fb.node)));
        }
        graph.feedback.insert(fb.node, fb.triplets);
    }
    if !matches!(graph.nodes.get(&database_id(&graph.database)), Some(Node::Database(_))) {
        return Err(GraphError::Corrupt(format!("database node for `{}` missing", graph.database)));
    }
    graph.reindex();
    graph.validate()?;
    Ok(graph)
}
