//! InfoAgent side of synthesis: grounding a question in schema columns,
//! policy-driven context expansion and feedback-driven pruning.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::FeedbackInfo;
use crate::explorer::is_key_column;
use crate::knowledge_base::{Embedder, KbError, KnowledgeBase};
use crate::schema_graph::SchemaGraph;
use crate::sql_exec::identifier_tokens;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Retrieved,
    Expanded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Table,
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub kind: ComponentKind,
    pub origin: Origin,
}

/// Schema components handed to the GenAgent. Tables are keyed by
/// `db.schema.table`, columns by `db.schema.table.column`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaContext {
    pub components: BTreeMap<String, Component>,
    pub join_hints: Vec<(String, String)>,
}

impl SchemaContext {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn ids(&self) -> Vec<String> {
        self.components.keys().cloned().collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.components.contains_key(id)
    }

    pub fn tables(&self) -> Vec<String> {
        self.of_kind(ComponentKind::Table)
    }

    pub fn columns(&self) -> Vec<String> {
        self.of_kind(ComponentKind::Column)
    }

    fn of_kind(&self, kind: ComponentKind) -> Vec<String> {
        self.components.iter().filter(|(_, c)| c.kind == kind).map(|(id, _)| id.clone()).collect()
    }

    /// Adds a table; an existing entry keeps its origin.
    pub fn add_table(&mut self, table: &str, origin: Origin) {
        self.components.entry(table.to_string()).or_insert(Component { kind: ComponentKind::Table, origin });
    }

    /// Adds a column and its table; an existing entry keeps its origin.
    pub fn add_column(&mut self, table: &str, column: &str, origin: Origin) -> String {
        self.add_table(table, origin);
        let id = format!("{table}.{column}");
        self.components.entry(id.clone()).or_insert(Component { kind: ComponentKind::Column, origin });
        id
    }

    pub fn add_join_hint(&mut self, left: String, right: String) {
        let exists = self.join_hints.iter().any(|(l, r)| (l == &left && r == &right) || (l == &right && r == &left));
        if !exists {
            self.join_hints.push((left, right));
        }
    }

    /// Every join endpoint is a component and every column's table is too.
    pub fn is_consistent(&self) -> bool {
        let hints_ok = self.join_hints.iter().all(|(l, r)| self.contains(l) && self.contains(r));
        let parents_ok = self.columns().iter().all(|c| c.rsplit_once('.').is_some_and(|(t, _)| self.contains(t)));
        hints_ok && parents_ok
    }

    /// JSON structure shown to the GenAgent: tables with their in-context
    /// columns, plus join hints.
    pub fn to_json(&self, graph: &SchemaGraph) -> Value {
        let tables: Vec<Value> = self
            .tables()
            .iter()
            .filter_map(|fqn| {
                let t = graph.table(fqn)?;
                let prefix = format!("{fqn}.");
                let columns: Vec<Value> = self
                    .components
                    .iter()
                    .filter(|(id, c)| c.kind == ComponentKind::Column && id.starts_with(&prefix))
                    .filter_map(|(id, c)| {
                        let view = graph.column(fqn, &id[prefix.len()..])?;
                        Some(json!({
                            "name": view.field.name,
                            "type": view.field.data_type,
                            "description": view.field.description,
                            "samples": view.field.sample_data,
                            "key": is_key_column(view.field),
                            "origin": c.origin,
                        }))
                    })
                    .collect();
                let mut entry = json!({ "table": t.sql_name(), "columns": columns });
                if let Some(gid) = graph.group_of(fqn) {
                    let members = graph.group_members(gid);
                    let sql_names: Vec<String> =
                        members.iter().filter_map(|m| graph.table(m)).map(|t| t.sql_name()).collect();
                    entry["shard_count"] = json!(sql_names.len());
                    entry["first_shard"] = json!(sql_names.first());
                    entry["last_shard"] = json!(sql_names.last());
                }
                Some(entry)
            })
            .collect();
        let hints: Vec<String> =
            self.join_hints.iter().map(|(l, r)| format!("{} = {}", short(graph, l), short(graph, r))).collect();
        json!({ "tables": tables, "join_hints": hints })
    }
}

fn short(graph: &SchemaGraph, column_id: &str) -> String {
    match column_id.rsplit_once('.') {
        Some((t, c)) => format!("{}.{c}", graph.short_table_name(t)),
        None => column_id.to_string(),
    }
}

/// Text embedded for grounding: the question followed by the keywords.
pub fn grounding_text(question: &str, keywords: &[String]) -> String {
    let mut text = question.trim().to_string();
    for k in keywords {
        text.push(' ');
        text.push_str(k);
    }
    text
}

/// Top-`k` columns for the question and keywords, each with its table,
/// tagged as retrieved. An empty column index yields an empty context.
pub fn ground_schema<F: Scalar>(
    keywords: &[String],
    question: &str,
    kb: &KnowledgeBase<F>,
    embedder: &dyn Embedder<F>,
    k: usize,
) -> Result<SchemaContext, KbError> {
    let mut ctx = SchemaContext::default();
    if kb.columns().is_empty() {
        return Ok(ctx);
    }
    let query = embedder.embed(&grounding_text(question, keywords))?;
    for (doc, _) in kb.retrieve_columns(&query, k) {
        ctx.add_column(&doc.table, &doc.column, Origin::Retrieved);
    }
    Ok(ctx)
}

/// Outcome of applying an expansion response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expansion {
    pub added: Vec<String>,
    pub dropped: Vec<String>,
}

/// Applies an expansion answer: one `table.column` or `a.x = b.y` per line
/// (commas also separate items), or `NONE`. Items that do not resolve in
/// the graph are dropped.
pub fn apply_expansion(context: &mut SchemaContext, graph: &SchemaGraph, response: &str) -> Expansion {
    let mut outcome = Expansion::default();
    let items = response
        .lines()
        .flat_map(|l| l.split(','))
        .map(|s| s.trim().trim_start_matches(['-', '*']).trim().trim_matches('`').trim())
        .filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("none"));
    for item in items {
        match item.split_once('=') {
            Some((l, r)) => match (graph.resolve_column(l.trim()), graph.resolve_column(r.trim())) {
                (Some((lt, lc)), Some((rt, rc))) => {
                    let before = context.len();
                    let left = context.add_column(&lt, &lc, Origin::Expanded);
                    let right = context.add_column(&rt, &rc, Origin::Expanded);
                    if context.len() > before {
                        outcome.added.push(item.to_string());
                    }
                    context.add_join_hint(left, right);
                }
                _ => outcome.dropped.push(item.to_string()),
            },
            None => match graph.resolve_column(item) {
                Some((t, c)) => {
                    let id = format!("{t}.{c}");
                    if !context.contains(&id) {
                        context.add_column(&t, &c, Origin::Expanded);
                        outcome.added.push(id);
                    }
                }
                None => outcome.dropped.push(item.to_string()),
            },
        }
    }
    for d in &outcome.dropped {
        tracing::warn!(proposal = %d, "expansion proposal not in schema, dropped");
    }
    outcome
}

/// Components of `context` that the failed SQL never names: a column is
/// used when its name appears as an identifier token, a table when its name
/// does or when any of its columns is used.
pub fn unused_components(context: &SchemaContext, failed_sql: &str) -> Vec<String> {
    let tokens: BTreeSet<String> = identifier_tokens(failed_sql).iter().map(|t| t.to_lowercase()).collect();
    let last = |id: &str| id.rsplit('.').next().unwrap_or(id).to_lowercase();
    let used_columns: Vec<String> = context.columns().into_iter().filter(|c| tokens.contains(&last(c))).collect();
    context
        .components
        .iter()
        .filter(|(id, c)| match c.kind {
            ComponentKind::Column => !used_columns.contains(id),
            ComponentKind::Table => {
                let prefix = format!("{id}.");
                !tokens.contains(&last(id)) && !used_columns.iter().any(|u| u.starts_with(&prefix))
            }
        })
        .map(|(id, _)| id.clone())
        .collect()
}

/// Removes the components the last failure marked unused. Tables that still
/// own a column and join hints with both ends present are kept. Identity
/// without feedback, and when pruning would leave nothing.
pub fn prune_context(context: &SchemaContext, feedback: Option<&FeedbackInfo>) -> SchemaContext {
    let Some(feedback) = feedback else { return context.clone() };
    let unused: BTreeSet<&str> = feedback.unused.iter().map(String::as_str).collect();
    let mut pruned = SchemaContext::default();
    for (id, c) in &context.components {
        if c.kind == ComponentKind::Column && !unused.contains(id.as_str()) {
            pruned.components.insert(id.clone(), *c);
        }
    }
    for (id, c) in &context.components {
        if c.kind == ComponentKind::Table {
            let prefix = format!("{id}.");
            if !unused.contains(id.as_str()) || pruned.components.keys().any(|k| k.starts_with(&prefix)) {
                pruned.components.insert(id.clone(), *c);
            }
        }
    }
    pruned.join_hints =
        context.join_hints.iter().filter(|(l, r)| pruned.contains(l) && pruned.contains(r)).cloned().collect();
    if pruned.is_empty() {
        return context.clone();
    }
    pruned
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::FailureReason;
    use crate::schema_graph::{graph_from_catalog, CatalogDef, FieldDef, SchemaDef, TableDef};

    fn graph() -> SchemaGraph {
        let t = |name: &str, cols: &[&str]| TableDef {
            name: name.into(),
            schema_name: "main".into(),
            database_name: "shop".into(),
            fields: cols.iter().map(|c| FieldDef::new(*c, "TEXT")).collect(),
            ddl_summary: None,
        };
        let catalog = CatalogDef {
            database_name: "shop".into(),
            schemas: vec![SchemaDef {
                name: "main".into(),
                description: None,
                tables: vec![
                    t("users", &["user_id", "user_name"]),
                    t("orders", &["order_id", "customer_id", "order_amount"]),
                ],
            }],
        };
        graph_from_catalog(&catalog).unwrap()
    }

    fn feedback(ctx: &SchemaContext, sql: &str) -> FeedbackInfo {
        FeedbackInfo {
            failed_sql: sql.into(),
            context: ctx.ids(),
            reason: FailureReason::ExecutionFailed,
            detail: String::new(),
            unused: unused_components(ctx, sql),
        }
    }

    #[test]
    fn expansion_adds_join_keys_and_hint() {
        let g = graph();
        let mut ctx = SchemaContext::default();
        ctx.add_column("shop.main.users", "user_name", Origin::Retrieved);
        ctx.add_column("shop.main.orders", "order_amount", Origin::Retrieved);
        let out = apply_expansion(&mut ctx, &g, "users.user_id = orders.customer_id\nghost.col");
        assert_eq!(out.dropped, vec!["ghost.col"]);
        assert!(ctx.contains("shop.main.users.user_id"));
        assert!(ctx.contains("shop.main.orders.customer_id"));
        assert_eq!(ctx.components["shop.main.orders.customer_id"].origin, Origin::Expanded);
        assert_eq!(ctx.join_hints, vec![("shop.main.users.user_id".into(), "shop.main.orders.customer_id".into())]);
        assert!(ctx.is_consistent());
    }

    #[test]
    fn none_answer_is_a_no_op() {
        let g = graph();
        let mut ctx = SchemaContext::default();
        ctx.add_column("shop.main.users", "user_name", Origin::Retrieved);
        let before = ctx.clone();
        assert_eq!(apply_expansion(&mut ctx, &g, "NONE"), Expansion::default());
        assert_eq!(ctx, before);
    }

    #[test]
    fn pruning_removes_only_unreferenced_items() {
        let mut ctx = SchemaContext::default();
        ctx.add_column("shop.main.users", "user_name", Origin::Retrieved);
        ctx.add_column("shop.main.users", "user_id", Origin::Retrieved);
        ctx.add_column("shop.main.orders", "order_amount", Origin::Retrieved);
        assert_eq!(ctx.len(), 5);
        let fb = feedback(&ctx, "SELECT user_name FROM users WHERE user_idd = 1");
        assert_eq!(fb.unused, vec!["shop.main.orders", "shop.main.orders.order_amount", "shop.main.users.user_id"]);
        let pruned = prune_context(&ctx, Some(&fb));
        assert_eq!(pruned.ids(), vec!["shop.main.users", "shop.main.users.user_name"]);
        assert_eq!(prune_context(&ctx, None), ctx);
    }

    #[test]
    fn pruning_never_empties_the_context() {
        let mut ctx = SchemaContext::default();
        ctx.add_column("shop.main.users", "user_name", Origin::Retrieved);
        let fb = feedback(&ctx, "SELEC 1");
        assert_eq!(prune_context(&ctx, Some(&fb)), ctx);
    }
}
