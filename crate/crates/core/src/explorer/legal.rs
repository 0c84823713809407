use serde_json::{json, Value};

use super::{Action, AggFunc, ColumnRef, CompareOp, QueryState, SortDir};
use crate::schema_graph::{FieldNode, SchemaGraph};

/// Key-column rule: the name is `id` or ends with `_id`/`id`
/// (case-insensitive), or the catalog marks the column as a key.
pub fn is_key_column(field: &FieldNode) -> bool {
    let name = field.name.to_ascii_lowercase();
    field.key || name == "id" || name.ends_with("_id") || name.ends_with("id")
}

pub fn is_numeric_type(data_type: &str) -> bool {
    let t = data_type.to_ascii_uppercase();
    ["INT", "REAL", "FLOA", "DOUB", "NUM", "DEC"].iter().any(|k| t.contains(k))
}

/// Predicate sketch by column type: `>` for numbers, `=` for text,
/// `NOTNULL` otherwise.
pub fn predicate_op(field: &FieldNode) -> CompareOp {
    let t = field.data_type.to_ascii_uppercase();
    if is_numeric_type(&t) {
        CompareOp::Gt
    } else if t.contains("CHAR") || t.contains("TEXT") || t.contains("CLOB") || t.contains("STRING") {
        CompareOp::Eq
    } else {
        CompareOp::NotNull
    }
}

/// Tables the explorer works with: every ungrouped table and the first
/// member of each shared field group (the other members are structurally
/// identical shards).
pub fn representative_tables(graph: &SchemaGraph) -> Vec<String> {
    graph
        .tables()
        .filter(|(_, t)| match graph.group_of(&t.fullname) {
            Some(gid) => graph.group_members(gid).first().is_some_and(|m| *m == t.fullname),
            None => true,
        })
        .map(|(_, t)| t.fullname.clone())
        .collect()
}

fn singular(name: &str) -> &str {
    name.strip_suffix('s').filter(|s| !s.is_empty()).unwrap_or(name)
}

/// A join condition between two tables, if one can be inferred: a declared
/// foreign key, then a shared key-column name (other than a bare `id`), then
/// `a.id = b.<a>_id`.
pub fn join_condition(graph: &SchemaGraph, a: &str, b: &str) -> Option<(ColumnRef, ColumnRef)> {
    let cols_a = graph.columns(a);
    let cols_b = graph.columns(b);
    let (ta, tb) = (graph.table(a)?, graph.table(b)?);
    let fk = |from: &str, cols: &[crate::schema_graph::ColumnView<'_>], to: &str| {
        cols.iter().find_map(|c| {
            let (t, col) = c.field.references.as_deref()?.rsplit_once('.')?;
            let target = graph.resolve_table(t)?;
            (target == to && graph.column(to, col).is_some())
                .then(|| (ColumnRef::new(from, &c.field.name), ColumnRef::new(to, col)))
        })
    };
    if let Some(pair) = fk(a, &cols_a, b) {
        return Some(pair);
    }
    if let Some((r, l)) = fk(b, &cols_b, a) {
        return Some((l, r));
    }
    for ca in &cols_a {
        if !is_key_column(ca.field) || ca.field.name.eq_ignore_ascii_case("id") {
            continue;
        }
        if let Some(cb) =
            cols_b.iter().find(|cb| is_key_column(cb.field) && cb.field.name.eq_ignore_ascii_case(&ca.field.name))
        {
            return Some((ColumnRef::new(a, &ca.field.name), ColumnRef::new(b, &cb.field.name)));
        }
    }
    let id_link = |owner: &crate::schema_graph::TableNode,
                   owner_cols: &[crate::schema_graph::ColumnView<'_>],
                   other_cols: &[crate::schema_graph::ColumnView<'_>]| {
        let id = owner_cols.iter().find(|c| c.field.name.eq_ignore_ascii_case("id"))?;
        let stem = singular(&owner.name).to_ascii_lowercase();
        let fk = other_cols.iter().find(|c| {
            let n = c.field.name.to_ascii_lowercase();
            n == format!("{stem}_id") || n == format!("{}_id", owner.name.to_ascii_lowercase())
        })?;
        Some((id.field.name.clone(), fk.field.name.clone()))
    };
    if let Some((id, fk)) = id_link(ta, &cols_a, &cols_b) {
        return Some((ColumnRef::new(a, id), ColumnRef::new(b, fk)));
    }
    if let Some((id, fk)) = id_link(tb, &cols_b, &cols_a) {
        return Some((ColumnRef::new(a, fk), ColumnRef::new(b, id)));
    }
    None
}

/// Actions whose preconditions hold in `state`.
///
/// * With nothing selected yet only `SelectUnusedColumn` (any column) and
///   `IntroduceJoin` (any joinable pair) are legal.
/// * `SelectUnusedColumn` skips columns already selected or aggregated; key
///   columns are exempt from that rule unless they are already a plain
///   output column.
/// * `ApplyAggregationFunction` needs a selected column (SUM/AVG only on
///   numeric columns); `AddGroupByClause` needs an aggregate and a plain
///   column; `AddOrderingClause` needs an output column; `AddHavingClause`
///   needs a GROUP BY and is offered once.
pub fn enumerate_legal_actions(state: &QueryState, graph: &SchemaGraph) -> Vec<Action> {
    let reps = representative_tables(graph);
    let mut out = Vec::new();
    if state.joined_tables.is_empty() {
        for t in &reps {
            for c in graph.columns(t) {
                out.push(Action::SelectUnusedColumn { column: ColumnRef::new(t.as_str(), &c.field.name) });
            }
        }
        for (i, a) in reps.iter().enumerate() {
            for b in &reps[i + 1..] {
                if let Some((left_key, right_key)) = join_condition(graph, a, b) {
                    out.push(Action::IntroduceJoin { left: a.clone(), right: b.clone(), left_key, right_key });
                }
            }
        }
        return out;
    }

    let joined: Vec<(ColumnRef, &FieldNode)> = state
        .joined_tables
        .iter()
        .flat_map(|t| graph.columns(t).into_iter().map(move |c| (ColumnRef::new(t.as_str(), &c.field.name), c.field)))
        .collect();
    let aggregated = |c: &ColumnRef| state.aggregates.iter().any(|(_, a)| a == c);
    let field_of = |c: &ColumnRef| joined.iter().find(|(r, _)| r == c).map(|(_, f)| *f);

    for (c, f) in &joined {
        let selected = state.selected_columns.contains(c);
        let offer = if is_key_column(f) { !selected } else { !selected && !aggregated(c) };
        if offer {
            out.push(Action::SelectUnusedColumn { column: c.clone() });
        }
    }
    for (c, f) in &joined {
        if !state.predicates.iter().any(|(p, _)| p == c) {
            out.push(Action::AddPredicateConstraint { column: c.clone(), op: predicate_op(f) });
        }
    }
    for t in reps.iter().filter(|t| !state.joined_tables.contains(t)) {
        if let Some((l, (left_key, right_key))) =
            state.joined_tables.iter().find_map(|l| join_condition(graph, l, t).map(|keys| (l, keys)))
        {
            out.push(Action::IntroduceJoin { left: l.clone(), right: t.clone(), left_key, right_key });
        }
    }
    let mut plain: Vec<&ColumnRef> = Vec::new();
    for c in &state.selected_columns {
        if !plain.contains(&c) {
            plain.push(c);
        }
    }
    for c in &plain {
        let numeric = field_of(c).is_some_and(|f| is_numeric_type(&f.data_type));
        for function in AggFunc::ALL {
            if (numeric || !function.needs_numeric())
                && !state.aggregates.iter().any(|(g, a)| *g == function && a == *c)
            {
                out.push(Action::ApplyAggregationFunction { function, column: (*c).clone() });
            }
        }
    }
    if state.has_aggregation {
        for c in plain.iter().filter(|c| !state.group_by.contains(c)) {
            out.push(Action::AddGroupByClause { column: (*c).clone() });
        }
    }
    let mut outputs: Vec<&ColumnRef> = plain.clone();
    outputs.extend(state.aggregates.iter().map(|(_, c)| c).filter(|c| !plain.contains(c)));
    for c in outputs.iter().filter(|c| !state.order_by.iter().any(|(o, _)| o == **c)) {
        for direction in [SortDir::Asc, SortDir::Desc] {
            out.push(Action::AddOrderingClause { column: (*c).clone(), direction });
        }
    }
    if state.has_group_by && state.having.is_empty() {
        for (c, f) in &joined {
            out.push(Action::AddHavingClause { function: AggFunc::Count, column: c.clone(), op: CompareOp::Gt });
            if is_numeric_type(&f.data_type) && !is_key_column(f) {
                out.push(Action::AddHavingClause { function: AggFunc::Sum, column: c.clone(), op: CompareOp::Gt });
            }
        }
    }
    out
}

/// Compact JSON description of `tables` for prompts: names, types,
/// descriptions, samples, key and documentation flags.
pub fn schema_context_json(graph: &SchemaGraph, tables: &[String]) -> Value {
    let entries: Vec<Value> = tables
        .iter()
        .filter_map(|fqn| {
            let t = graph.table(fqn)?;
            let group = graph.group_of(fqn);
            let columns: Vec<Value> = graph
                .columns(fqn)
                .into_iter()
                .map(|c| {
                    json!({
                        "name": c.field.name,
                        "type": c.field.data_type,
                        "description": c.field.description,
                        "samples": c.field.sample_data,
                        "key": is_key_column(c.field),
                        "documented": c.field.has_documentation(),
                    })
                })
                .collect();
            Some(json!({
                "table": fqn,
                "name": graph.short_table_name(fqn),
                "sql_name": t.sql_name(),
                "field_group": group.and_then(|g| graph.group(g)).map(|g| g.name.clone()),
                "shards": group.map(|g| graph.group_members(g).len()),
                "columns": columns,
            }))
        })
        .collect();
    json!({ "tables": entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::ActionKind;
    use crate::schema_graph::{graph_from_catalog, CatalogDef, FieldDef, SchemaDef, TableDef};

    fn shop() -> SchemaGraph {
        let t = |name: &str, fields: Vec<FieldDef>| TableDef {
            name: name.into(),
            schema_name: "main".into(),
            database_name: "shop".into(),
            fields,
            ddl_summary: None,
        };
        let users = t(
            "users",
            vec![FieldDef::new("id", "INTEGER"), FieldDef::new("name", "TEXT"), FieldDef::new("age", "INTEGER")],
        );
        let orders = t(
            "orders",
            vec![FieldDef::new("id", "INTEGER"), FieldDef::new("user_id", "INTEGER"), FieldDef::new("amount", "REAL")],
        );
        let notes = t("notes", vec![FieldDef::new("body", "TEXT")]);
        graph_from_catalog(&CatalogDef {
            database_name: "shop".into(),
            schemas: vec![SchemaDef { name: "main".into(), description: None, tables: vec![users, orders, notes] }],
        })
        .unwrap()
    }

    fn col(t: &str, c: &str) -> ColumnRef {
        ColumnRef::new(format!("shop.main.{t}"), c)
    }

    #[test]
    fn root_offers_only_selection_and_joins() {
        let g = shop();
        let legal = enumerate_legal_actions(&QueryState::default(), &g);
        assert!(legal.iter().all(|a| matches!(a.kind(), ActionKind::SelectUnusedColumn | ActionKind::IntroduceJoin)));
        assert_eq!(legal.iter().filter(|a| a.kind() == ActionKind::SelectUnusedColumn).count(), 7);
        let joins: Vec<&Action> = legal.iter().filter(|a| a.kind() == ActionKind::IntroduceJoin).collect();
        assert_eq!(joins.len(), 1);
        assert_eq!(
            joins[0],
            &Action::IntroduceJoin {
                left: "shop.main.orders".into(),
                right: "shop.main.users".into(),
                left_key: col("orders", "user_id"),
                right_key: col("users", "id"),
            }
        );
    }

    #[test]
    fn group_by_unlocks_having() {
        let g = shop();
        let s = QueryState::default()
            .apply(&Action::SelectUnusedColumn { column: col("users", "name") })
            .apply(&Action::SelectUnusedColumn { column: col("users", "age") })
            .apply(&Action::ApplyAggregationFunction { function: AggFunc::Avg, column: col("users", "age") });
        assert!(!enumerate_legal_actions(&s, &g).iter().any(|a| a.kind() == ActionKind::AddHavingClause));
        let s = s.apply(&Action::AddGroupByClause { column: col("users", "name") });
        assert!(enumerate_legal_actions(&s, &g).iter().any(|a| a.kind() == ActionKind::AddHavingClause));
    }

    #[test]
    fn only_key_columns_remain_selectable() {
        let g = shop();
        let s = QueryState::default()
            .apply(&Action::SelectUnusedColumn { column: col("users", "name") })
            .apply(&Action::SelectUnusedColumn { column: col("users", "age") });
        let selectable: Vec<Action> = enumerate_legal_actions(&s, &g)
            .into_iter()
            .filter(|a| a.kind() == ActionKind::SelectUnusedColumn)
            .collect();
        assert_eq!(selectable, vec![Action::SelectUnusedColumn { column: col("users", "id") }]);
    }

    #[test]
    fn aggregation_needs_selection_and_numeric_for_sum() {
        let g = shop();
        let s = QueryState::default().apply(&Action::SelectUnusedColumn { column: col("users", "name") });
        let aggs: Vec<Action> = enumerate_legal_actions(&s, &g)
            .into_iter()
            .filter(|a| a.kind() == ActionKind::ApplyAggregationFunction)
            .collect();
        assert_eq!(aggs.len(), 3); // COUNT, MAX, MIN on text
    }

    #[test]
    fn key_heuristic() {
        let f = |n: &str| FieldNode {
            database: "d".into(),
            schema: "s".into(),
            table: None,
            name: n.into(),
            data_type: "TEXT".into(),
            description: None,
            sample_data: None,
            node_type: crate::schema_graph::FieldNodeType::UniqueField,
            key: false,
            references: None,
        };
        assert!(is_key_column(&f("ID")));
        assert!(is_key_column(&f("user_id")));
        assert!(is_key_column(&f("userid")));
        assert!(!is_key_column(&f("name")));
    }
}
