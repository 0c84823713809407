//! Deterministic stand-ins for tests, demos and the `rules` CLI policy: a
//! seeded rule-based policy that answers every request kind from the prompt
//! alone, and synthetic catalog generators.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::deployment::fallback_keywords;
use crate::explorer::{AggFunc, ColumnRef, CompareOp, QueryState};
use crate::knowledge_base::SchemaFragment;
use crate::model_gateway::{Backend, GatewayError, PolicyRequest, RequestKind};
use crate::prompts::section;
use crate::schema_graph::{quote_ident, CatalogDef, FieldDef, SchemaDef, TableDef};

/// A policy with no language model behind it.
///
/// * action selection: a seeded random candidate and a seeded random
///   legal action of it;
/// * SQL completion while exploring: the query state compiled literally,
///   with predicate constants taken from the column samples;
/// * SQL completion while answering: the SQL of the top example, or a
///   preview of the first in-context table when there is none;
/// * descriptions from a template, keywords from the fallback tokenizer,
///   no context expansion, and every result judged aligned.
pub struct RuleBasedPolicy {
    rng: Mutex<ChaCha8Rng>,
}

impl RuleBasedPolicy {
    pub fn new(seed: u64) -> Self {
        RuleBasedPolicy { rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)) }
    }

    fn choose_action(&self, candidates: &str) -> Result<String, GatewayError> {
        let mut offered: Vec<(&str, Vec<&str>)> = Vec::new();
        for line in candidates.lines() {
            if let Some(rest) = line.strip_prefix('@') {
                offered.push((rest.split_whitespace().next().unwrap_or(""), Vec::new()));
            } else if let (Some(action), Some((_, actions))) = (line.strip_prefix("- "), offered.last_mut()) {
                actions.push(action);
            }
        }
        offered.retain(|(_, actions)| !actions.is_empty());
        if offered.is_empty() {
            return Err(GatewayError::BadResponse("no candidate with legal actions in prompt".into()));
        }
        let mut rng = self.rng.lock().unwrap_or_else(|p| p.into_inner());
        let (id, actions) = &offered[rng.gen_range(0..offered.len())];
        Ok(format!("@{id} {}", actions[rng.gen_range(0..actions.len())]))
    }
}

impl Backend for RuleBasedPolicy {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        let get = |title: &str| request.get(title).unwrap_or_default();
        match request.kind {
            RequestKind::ActionSelection => self.choose_action(get(section::CANDIDATES)),
            RequestKind::SqlCompletion => match request.get(section::QUERY_STATE) {
                Some(state) => {
                    let state: QueryState =
                        serde_json::from_str(state).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
                    let ctx: Value = serde_json::from_str(get(section::SCHEMA_CONTEXT)).unwrap_or(Value::Null);
                    Ok(compile_state(&state, &ctx))
                }
                None => Ok(answer_from_examples(request)),
            },
            RequestKind::NlDescription => {
                let fragment: SchemaFragment = serde_json::from_str(get(section::SCHEMA_CONTEXT)).unwrap_or_default();
                Ok(describe(&fragment))
            }
            RequestKind::KeywordExtraction => {
                Ok(serde_json::to_string(&fallback_keywords(get(section::QUESTION))).expect("strings serialize"))
            }
            RequestKind::ContextExpansion => Ok("NONE".to_string()),
            RequestKind::FidelityJudgment => Ok("ALIGNED".to_string()),
        }
    }

    fn name(&self) -> &str {
        "rules"
    }
}

fn last_segment(id: &str) -> &str {
    id.rsplit('.').next().unwrap_or(id)
}

fn describe(fragment: &SchemaFragment) -> String {
    let mut columns: Vec<&str> = fragment.columns.iter().map(|c| last_segment(c)).collect();
    columns.dedup();
    let tables: Vec<&str> = fragment.tables.iter().map(|t| last_segment(t)).collect();
    if columns.is_empty() {
        format!("Which rows combine the {} tables?", tables.join(" and "))
    } else {
        format!("What are the {} values in {}?", columns.join(", "), tables.join(" joined with "))
    }
}

fn answer_from_examples(request: &PolicyRequest) -> String {
    if let Some(sql) = request.get(section::EXAMPLES).and_then(|e| e.lines().find_map(|l| l.strip_prefix("SQL: "))) {
        return sql.trim().to_string();
    }
    let ctx: Value =
        serde_json::from_str(request.get(section::SCHEMA_CONTEXT).unwrap_or_default()).unwrap_or(Value::Null);
    match ctx["tables"][0]["table"].as_str() {
        Some(table) => format!("SELECT * FROM {} LIMIT 10", quote_table(table)),
        None => "SELECT 1".to_string(),
    }
}

fn quote_table(sql_name: &str) -> String {
    sql_name.split('.').map(quote_ident).collect::<Vec<_>>().join(".")
}

/// Literal SQL for a query state over the tables described by `ctx` (the
/// explorer's schema-context JSON).
pub fn compile_state(state: &QueryState, ctx: &Value) -> String {
    let tables = ctx["tables"].as_array().cloned().unwrap_or_default();
    let info = |fqn: &str| tables.iter().find(|t| t["table"].as_str() == Some(fqn));
    let alias = |fqn: &str| {
        state.joined_tables.iter().position(|t| t == fqn).map_or_else(|| "t0".to_string(), |i| format!("t{i}"))
    };
    let expr = |c: &ColumnRef| format!("{}.{}", alias(&c.table), quote_ident(&c.column));
    let samples = |c: &ColumnRef| -> Vec<String> {
        info(&c.table)
            .and_then(|t| t["columns"].as_array())
            .and_then(|cols| cols.iter().find(|x| x["name"].as_str() == Some(c.column.as_str())))
            .and_then(|x| x["samples"].as_array())
            .map(|s| s.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    let table_sql = |fqn: &str| {
        let name = info(fqn).and_then(|t| t["sql_name"].as_str()).unwrap_or_else(|| last_segment(fqn));
        format!("{} AS {}", quote_table(name), alias(fqn))
    };

    let mut select: Vec<String> = Vec::new();
    let push = |s: String, list: &mut Vec<String>| {
        if !list.contains(&s) {
            list.push(s);
        }
    };
    for c in &state.group_by {
        push(expr(c), &mut select);
    }
    for c in &state.selected_columns {
        push(expr(c), &mut select);
    }
    for (f, c) in &state.aggregates {
        push(format!("{}({})", f.as_str(), expr(c)), &mut select);
    }
    let mut sql = format!("SELECT {}", if select.is_empty() { "*".to_string() } else { select.join(", ") });

    let Some(first) = state.joined_tables.first() else { return "SELECT 1".to_string() };
    sql.push_str(&format!(" FROM {}", table_sql(first)));
    let mut placed = vec![first.clone()];
    for t in &state.joined_tables[1..] {
        let on = state.joins.iter().find(|(l, r)| {
            (&l.table == t && placed.contains(&r.table)) || (&r.table == t && placed.contains(&l.table))
        });
        match on {
            Some((l, r)) => sql.push_str(&format!(" JOIN {} ON {} = {}", table_sql(t), expr(l), expr(r))),
            None => sql.push_str(&format!(" CROSS JOIN {}", table_sql(t))),
        }
        placed.push(t.clone());
    }

    let predicates: Vec<String> = state
        .predicates
        .iter()
        .map(|(c, op)| {
            let values = samples(c);
            match op {
                CompareOp::Gt => values
                    .iter()
                    .filter_map(|v| v.parse::<f64>().ok().map(|n| (n, v)))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map_or_else(|| format!("{} IS NOT NULL", expr(c)), |(_, v)| format!("{} > {v}", expr(c))),
                CompareOp::Eq => values.first().map_or_else(
                    || format!("{} IS NOT NULL", expr(c)),
                    |v| format!("{} = '{}'", expr(c), v.replace('\'', "''")),
                ),
                CompareOp::Lt => values
                    .iter()
                    .filter_map(|v| v.parse::<f64>().ok().map(|n| (n, v)))
                    .max_by(|a, b| a.0.total_cmp(&b.0))
                    .map_or_else(|| format!("{} IS NOT NULL", expr(c)), |(_, v)| format!("{} < {v}", expr(c))),
                CompareOp::NotNull => format!("{} IS NOT NULL", expr(c)),
            }
        })
        .collect();
    if !predicates.is_empty() {
        sql.push_str(&format!(" WHERE {}", predicates.join(" AND ")));
    }

    // plain columns next to an aggregate are grouped even without an explicit clause
    if !state.group_by.is_empty() || (!state.aggregates.is_empty() && !state.selected_columns.is_empty()) {
        let mut keys: Vec<String> = Vec::new();
        for c in state.group_by.iter().chain(&state.selected_columns) {
            push(expr(c), &mut keys);
        }
        sql.push_str(&format!(" GROUP BY {}", keys.join(", ")));
    }
    if !state.having.is_empty() {
        let clauses: Vec<String> = state
            .having
            .iter()
            .map(|(f, c, _)| match f {
                AggFunc::Count => format!("COUNT({}) > 1", expr(c)),
                _ => format!("{}({}) > 0", f.as_str(), expr(c)),
            })
            .collect();
        sql.push_str(&format!(" HAVING {}", clauses.join(" AND ")));
    }
    if !state.order_by.is_empty() {
        let keys: Vec<String> = state.order_by.iter().map(|(c, d)| format!("{} {}", expr(c), d.as_str())).collect();
        sql.push_str(&format!(" ORDER BY {}", keys.join(", ")));
    }
    sql
}

/// `shards` structurally identical tables `events_00000..` with `fields`
/// columns each, plus `unique_tables` tables whose field sets differ from
/// each other and from the shards.
pub fn sharded_catalog(shards: usize, unique_tables: usize, fields: usize) -> CatalogDef {
    let shard_fields: Vec<FieldDef> =
        (0..fields).map(|i| FieldDef::new(format!("f{i:02}"), if i % 2 == 0 { "TEXT" } else { "INTEGER" })).collect();
    let mut tables: Vec<TableDef> = (0..shards)
        .map(|i| TableDef {
            name: format!("events_{i:05}"),
            schema_name: "analytics".into(),
            database_name: "warehouse".into(),
            fields: shard_fields.clone(),
            ddl_summary: None,
        })
        .collect();
    tables.extend((0..unique_tables).map(|j| {
        TableDef {
            name: format!("dim_{j:02}"),
            schema_name: "analytics".into(),
            database_name: "warehouse".into(),
            fields: (0..=j % 4)
                .map(|k| FieldDef::new(format!("dim{j}_c{k}"), "TEXT"))
                .chain([FieldDef::new("id", "INTEGER")])
                .collect(),
            ddl_summary: None,
        }
    }));
    CatalogDef {
        database_name: "warehouse".into(),
        schemas: vec![SchemaDef { name: "analytics".into(), description: None, tables }],
    }
}
