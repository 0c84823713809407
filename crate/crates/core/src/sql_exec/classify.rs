use serde::{Deserialize, Serialize};

use super::{is_bare_count, ExecutionResult, SqlError, SqlValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResultClass {
    Error,
    Empty,
    Trivial,
    NonTrivial,
}

/// Classifies a result on its values alone: no rows is `Empty`, rows made
/// only of NULLs are `Trivial`.
pub fn classify(result: &ExecutionResult) -> ResultClass {
    if result.rows.is_empty() {
        ResultClass::Empty
    } else if result.rows.iter().all(|row| row.iter().all(SqlValue::is_null)) {
        ResultClass::Trivial
    } else {
        ResultClass::NonTrivial
    }
}

/// [`classify`] plus the statement-aware rule: a single `0` produced by a
/// bare `COUNT` over an unfiltered table is `Trivial`.
pub fn classify_query(sql: &str, result: &ExecutionResult) -> ResultClass {
    let class = classify(result);
    if class == ResultClass::NonTrivial
        && result.rows.len() == 1
        && result.columns.len() == 1
        && result.rows[0][0] == SqlValue::Integer(0)
        && is_bare_count(sql)
    {
        return ResultClass::Trivial;
    }
    class
}

/// Total over execution outcomes: failures map to `Error`.
pub fn classify_outcome(sql: &str, outcome: &Result<ExecutionResult, SqlError>) -> ResultClass {
    match outcome {
        Ok(result) => classify_query(sql, result),
        Err(_) => ResultClass::Error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(rows: Vec<Vec<SqlValue>>) -> ExecutionResult {
        let width = rows.first().map_or(1, Vec::len);
        ExecutionResult::new((0..width).map(|i| format!("c{i}")).collect(), rows)
    }

    #[test]
    fn zero_rows_is_empty() {
        assert_eq!(classify(&result(vec![])), ResultClass::Empty);
    }

    #[test]
    fn all_null_row_is_trivial() {
        assert_eq!(classify(&result(vec![vec![SqlValue::Null, SqlValue::Null]])), ResultClass::Trivial);
    }

    #[test]
    fn two_valued_rows_are_non_trivial() {
        let r = result(vec![vec![SqlValue::Integer(1)], vec![SqlValue::Text("x".into())]]);
        assert_eq!(classify(&r), ResultClass::NonTrivial);
    }

    #[test]
    fn zero_count_over_whole_table_is_trivial() {
        let r = result(vec![vec![SqlValue::Integer(0)]]);
        assert_eq!(classify_query("SELECT COUNT(*) FROM events", &r), ResultClass::Trivial);
        assert_eq!(classify_query("SELECT COUNT(*) FROM events WHERE x > 1", &r), ResultClass::NonTrivial);
        let nonzero = result(vec![vec![SqlValue::Integer(4)]]);
        assert_eq!(classify_query("SELECT COUNT(*) FROM events", &nonzero), ResultClass::NonTrivial);
    }

    #[test]
    fn errors_classify_as_error() {
        assert_eq!(classify_outcome("SELECT 1", &Err(SqlError::Timeout)), ResultClass::Error);
    }
}
