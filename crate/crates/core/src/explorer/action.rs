use std::fmt;

use serde::{Deserialize, Serialize};

/// A column of a concrete table, by fully-qualified table name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef { table: table.into(), column: column.into() }
    }

    /// Whether `reference` (`col`, `table.col`, `schema.table.col`, ...)
    /// names this column. Case-insensitive.
    pub fn matches_reference(&self, reference: &str) -> bool {
        let mut parts: Vec<&str> = reference.split('.').collect();
        let Some(column) = parts.pop() else { return false };
        column.eq_ignore_ascii_case(&self.column) && (parts.is_empty() || table_matches(&self.table, &parts.join(".")))
    }

    pub fn fqn(&self) -> String {
        format!("{}.{}", self.table, self.column)
    }
}

/// Whether `reference` is a dot-segment suffix of the fully-qualified
/// `table` name. Case-insensitive.
pub fn table_matches(table: &str, reference: &str) -> bool {
    let full: Vec<&str> = table.split('.').collect();
    let want: Vec<&str> = reference.split('.').collect();
    !reference.is_empty()
        && want.len() <= full.len()
        && full[full.len() - want.len()..].iter().zip(&want).all(|(a, b)| a.eq_ignore_ascii_case(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Max,
    Min,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [AggFunc::Count, AggFunc::Sum, AggFunc::Avg, AggFunc::Max, AggFunc::Min];

    pub fn as_str(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Max => "MAX",
            AggFunc::Min => "MIN",
        }
    }

    pub fn needs_numeric(self) -> bool {
        matches!(self, AggFunc::Sum | AggFunc::Avg)
    }
}

/// Comparison sketch of a predicate; the literal is chosen at SQL time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "NOTNULL")]
    NotNull,
}

impl CompareOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
            CompareOp::Eq => "=",
            CompareOp::NotNull => "NOTNULL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SortDir {
    Asc,
    Desc,
}

impl SortDir {
    pub fn as_str(self) -> &'static str {
        match self {
            SortDir::Asc => "ASC",
            SortDir::Desc => "DESC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    SelectUnusedColumn,
    AddPredicateConstraint,
    IntroduceJoin,
    ApplyAggregationFunction,
    AddGroupByClause,
    AddOrderingClause,
    AddHavingClause,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::SelectUnusedColumn,
        ActionKind::AddPredicateConstraint,
        ActionKind::IntroduceJoin,
        ActionKind::ApplyAggregationFunction,
        ActionKind::AddGroupByClause,
        ActionKind::AddOrderingClause,
        ActionKind::AddHavingClause,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::SelectUnusedColumn => "SelectUnusedColumn",
            ActionKind::AddPredicateConstraint => "AddPredicateConstraint",
            ActionKind::IntroduceJoin => "IntroduceJoin",
            ActionKind::ApplyAggregationFunction => "ApplyAggregationFunction",
            ActionKind::AddGroupByClause => "AddGroupByClause",
            ActionKind::AddOrderingClause => "AddOrderingClause",
            ActionKind::AddHavingClause => "AddHavingClause",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ActionKind::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One step of query construction.
///
/// Response grammar, one line, tokens separated by whitespace, anything
/// after `#` ignored:
///
/// ```text
/// SelectUnusedColumn <table>.<column>
/// AddPredicateConstraint <table>.<column> <op>          op: > < = NOTNULL
/// IntroduceJoin <table> <table>
/// ApplyAggregationFunction <FUNC> <table>.<column>      FUNC: COUNT SUM AVG MAX MIN
/// AddGroupByClause <table>.<column>
/// AddOrderingClause <table>.<column> <ASC|DESC>
/// AddHavingClause <FUNC> <table>.<column> <op>
/// ```
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Action {
    SelectUnusedColumn { column: ColumnRef },
    AddPredicateConstraint { column: ColumnRef, op: CompareOp },
    IntroduceJoin { left: String, right: String, left_key: ColumnRef, right_key: ColumnRef },
    ApplyAggregationFunction { function: AggFunc, column: ColumnRef },
    AddGroupByClause { column: ColumnRef },
    AddOrderingClause { column: ColumnRef, direction: SortDir },
    AddHavingClause { function: AggFunc, column: ColumnRef, op: CompareOp },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::SelectUnusedColumn { .. } => ActionKind::SelectUnusedColumn,
            Action::AddPredicateConstraint { .. } => ActionKind::AddPredicateConstraint,
            Action::IntroduceJoin { .. } => ActionKind::IntroduceJoin,
            Action::ApplyAggregationFunction { .. } => ActionKind::ApplyAggregationFunction,
            Action::AddGroupByClause { .. } => ActionKind::AddGroupByClause,
            Action::AddOrderingClause { .. } => ActionKind::AddOrderingClause,
            Action::AddHavingClause { .. } => ActionKind::AddHavingClause,
        }
    }

    /// Columns the action reads.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        match self {
            Action::SelectUnusedColumn { column }
            | Action::AddPredicateConstraint { column, .. }
            | Action::ApplyAggregationFunction { column, .. }
            | Action::AddGroupByClause { column }
            | Action::AddOrderingClause { column, .. }
            | Action::AddHavingClause { column, .. } => vec![column],
            Action::IntroduceJoin { left_key, right_key, .. } => vec![left_key, right_key],
        }
    }

    /// Renders the response-grammar line, naming tables with `name`.
    pub fn render(&self, name: &dyn Fn(&str) -> String) -> String {
        let col = |c: &ColumnRef| format!("{}.{}", name(&c.table), c.column);
        let kind = self.kind();
        match self {
            Action::SelectUnusedColumn { column } | Action::AddGroupByClause { column } => {
                format!("{kind} {}", col(column))
            }
            Action::AddPredicateConstraint { column, op } => format!("{kind} {} {}", col(column), op.as_str()),
            Action::IntroduceJoin { left, right, left_key, right_key } => {
                format!("{kind} {} {} # {} = {}", name(left), name(right), col(left_key), col(right_key))
            }
            Action::ApplyAggregationFunction { function, column } => {
                format!("{kind} {} {}", function.as_str(), col(column))
            }
            Action::AddOrderingClause { column, direction } => format!("{kind} {} {}", col(column), direction.as_str()),
            Action::AddHavingClause { function, column, op } => {
                format!("{kind} {} {} {}", function.as_str(), col(column), op.as_str())
            }
        }
    }

    /// Whether the argument tokens of a response line select this action.
    pub fn matches_args(&self, args: &[&str]) -> bool {
        match (self, args) {
            (Action::SelectUnusedColumn { column }, [c]) | (Action::AddGroupByClause { column }, [c]) => {
                column.matches_reference(c)
            }
            (Action::AddPredicateConstraint { column, op }, [c, o]) => {
                column.matches_reference(c) && op.as_str().eq_ignore_ascii_case(o)
            }
            (Action::IntroduceJoin { left, right, .. }, [a, b]) => {
                (table_matches(left, a) && table_matches(right, b))
                    || (table_matches(left, b) && table_matches(right, a))
            }
            (Action::ApplyAggregationFunction { function, column }, [f, c]) => {
                function.as_str().eq_ignore_ascii_case(f) && column.matches_reference(c)
            }
            (Action::AddOrderingClause { column, direction }, [c, d]) => {
                column.matches_reference(c) && direction.as_str().eq_ignore_ascii_case(d)
            }
            (Action::AddHavingClause { function, column, op }, [f, c, o]) => {
                function.as_str().eq_ignore_ascii_case(f)
                    && column.matches_reference(c)
                    && op.as_str().eq_ignore_ascii_case(o)
            }
            _ => false,
        }
    }
}
