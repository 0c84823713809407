use serde::{Deserialize, Serialize};

use super::{Action, AggFunc, ColumnRef, CompareOp, SortDir};

/// A partial query: the action sequence plus the clauses it implies.
///
/// Every field other than `actions` is derived by [`QueryState::apply`], so
/// two states with the same action sequence are equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryState {
    pub actions: Vec<Action>,
    /// Plain (non-aggregated) output columns, in selection order; key
    /// columns may repeat.
    pub selected_columns: Vec<ColumnRef>,
    pub joined_tables: Vec<String>,
    pub joins: Vec<(ColumnRef, ColumnRef)>,
    pub predicates: Vec<(ColumnRef, CompareOp)>,
    pub aggregates: Vec<(AggFunc, ColumnRef)>,
    pub group_by: Vec<ColumnRef>,
    pub order_by: Vec<(ColumnRef, SortDir)>,
    pub having: Vec<(AggFunc, ColumnRef, CompareOp)>,
    pub constraint_count: usize,
    pub has_aggregation: bool,
    pub has_group_by: bool,
}

impl QueryState {
    pub fn from_actions<'a>(actions: impl IntoIterator<Item = &'a Action>) -> Self {
        actions.into_iter().fold(QueryState::default(), |s, a| s.apply(a))
    }

    pub fn depth(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn join_table(&mut self, table: &str) {
        if !self.joined_tables.iter().any(|t| t == table) {
            self.joined_tables.push(table.to_string());
        }
    }

    /// The state extended by one action.
    pub fn apply(&self, action: &Action) -> QueryState {
        let mut s = self.clone();
        s.actions.push(action.clone());
        match action {
            Action::SelectUnusedColumn { column } => {
                s.join_table(&column.table);
                s.selected_columns.push(column.clone());
            }
            Action::AddPredicateConstraint { column, op } => {
                s.predicates.push((column.clone(), *op));
                s.constraint_count += 1;
            }
            Action::IntroduceJoin { left, right, left_key, right_key } => {
                s.join_table(left);
                s.join_table(right);
                s.joins.push((left_key.clone(), right_key.clone()));
            }
            Action::ApplyAggregationFunction { function, column } => {
                if let Some(pos) = s.selected_columns.iter().position(|c| c == column) {
                    s.selected_columns.remove(pos);
                }
                s.aggregates.push((*function, column.clone()));
                s.has_aggregation = true;
            }
            Action::AddGroupByClause { column } => {
                s.group_by.push(column.clone());
                s.has_group_by = true;
            }
            Action::AddOrderingClause { column, direction } => s.order_by.push((column.clone(), *direction)),
            Action::AddHavingClause { function, column, op } => {
                s.having.push((*function, column.clone(), *op));
                s.constraint_count += 1;
            }
        }
        s
    }

    /// Flags agree with the action sequence.
    pub fn is_consistent(&self) -> bool {
        let has = |k: super::ActionKind| self.actions.iter().any(|a| a.kind() == k);
        self.has_group_by == has(super::ActionKind::AddGroupByClause)
            && self.has_aggregation == has(super::ActionKind::ApplyAggregationFunction)
            && *self == QueryState::from_actions(&self.actions)
    }

    /// Every column the state mentions, in first-mention order.
    pub fn referenced_columns(&self) -> Vec<ColumnRef> {
        let mut out: Vec<ColumnRef> = Vec::new();
        for a in &self.actions {
            for c in a.columns() {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        out
    }
}
