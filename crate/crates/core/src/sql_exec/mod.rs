//! SQL syntax checks, bounded read-only execution, result classification and
//! result-set comparison over the embedded SQLite engine.

mod check;
mod classify;
mod compare;
mod executor;
mod locator;
mod value;

use thiserror::Error;

pub use check::{has_top_level_order_by, identifier_tokens, is_bare_count, is_query, parse_check};
pub use classify::{classify, classify_outcome, classify_query, ResultClass};
pub use compare::results_equal;
pub use executor::{ExecSession, Executor, DEFAULT_ROW_LIMIT, DEFAULT_TIMEOUT};
pub use locator::DbLocator;
pub use value::{ExecutionResult, SqlValue};

#[derive(Debug, Error)]
pub enum SqlError {
    /// `token` is the 1-based index of the first token at or after the
    /// reported position; 0 when the position is unknown.
    #[error("syntax error at token {token} (line {line}, column {column}): {message}")]
    Syntax { token: usize, line: u64, column: u64, message: String },
    #[error("expected a single statement, found {0}")]
    MultiStatement(usize),
    #[error("statement is not read-only")]
    NotReadOnly,
    #[error("timeout")]
    Timeout,
    #[error("database unreachable: {0}")]
    Unreachable(String),
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
}

impl SqlError {
    pub fn is_syntax(&self) -> bool {
        matches!(self, SqlError::Syntax { .. } | SqlError::MultiStatement(_))
    }
}
