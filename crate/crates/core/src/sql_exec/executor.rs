use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rusqlite::Connection;

use super::{DbLocator, ExecutionResult, SqlError, SqlValue};

pub const DEFAULT_ROW_LIMIT: usize = 100;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

/// Bounded, read-only query execution against one database.
///
/// The executor owns one connection behind a mutex, so it can be shared by
/// concurrent callers; [`Executor::connect`] opens further independent
/// connections to the same locator.
pub struct Executor {
    locator: DbLocator,
    conn: Mutex<Connection>,
    timeout: Duration,
    calls: AtomicU64,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("locator", &self.locator).field("timeout", &self.timeout).finish()
    }
}

impl Executor {
    pub fn open(locator: DbLocator) -> Result<Self, SqlError> {
        let conn = locator.open_read_only()?;
        Ok(Self::with_connection(locator, conn))
    }

    pub fn open_str(source: &str) -> Result<Self, SqlError> {
        Self::open(DbLocator::parse(source))
    }

    /// Wraps an existing connection; it is switched to query-only mode.
    pub fn with_connection(locator: DbLocator, conn: Connection) -> Self {
        let _ = conn.pragma_update(None, "query_only", true);
        Executor { locator, conn: Mutex::new(conn), timeout: DEFAULT_TIMEOUT, calls: AtomicU64::new(0) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn locator(&self) -> &DbLocator {
        &self.locator
    }

    /// An independent executor over a new connection to the same database.
    pub fn connect(&self) -> Result<Executor, SqlError> {
        Ok(Executor::open(self.locator.clone())?.with_timeout(self.timeout))
    }

    /// Total `execute` calls over the executor's lifetime.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn session(&self) -> ExecSession<'_> {
        ExecSession { executor: self, calls: Cell::new(0) }
    }

    /// Runs one read-only statement, keeping at most `row_limit` rows.
    pub fn execute(&self, sql: &str, row_limit: usize) -> Result<ExecutionResult, SqlError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        let deadline = Instant::now() + self.timeout;
        conn.progress_handler(1_000, Some(move || Instant::now() > deadline))?;
        let outcome = run_query(&conn, sql, row_limit);
        conn.progress_handler(0, None::<fn() -> bool>)?;
        outcome.map_err(|e| match e {
            SqlError::Sqlite(rusqlite::Error::SqliteFailure(err, _))
                if err.code == rusqlite::ErrorCode::OperationInterrupted =>
            {
                SqlError::Timeout
            }
            other => other,
        })
    }
}

fn run_query(conn: &Connection, sql: &str, row_limit: usize) -> Result<ExecutionResult, SqlError> {
    let mut stmt = conn.prepare(sql)?;
    if !stmt.readonly() {
        return Err(SqlError::NotReadOnly);
    }
    let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
    let width = columns.len();
    let mut rows = Vec::new();
    let mut truncated = false;
    let mut cursor = stmt.query([])?;
    while let Some(row) = cursor.next()? {
        if rows.len() == row_limit {
            truncated = true;
            break;
        }
        let mut values = Vec::with_capacity(width);
        for i in 0..width {
            values.push(SqlValue::from(row.get_ref(i)?));
        }
        rows.push(values);
    }
    Ok(ExecutionResult { columns, rows, truncated, row_limit })
}

/// Counts the executions issued through it; one per synthesis or
/// exploration run.
pub struct ExecSession<'e> {
    executor: &'e Executor,
    calls: Cell<u64>,
}

impl ExecSession<'_> {
    pub fn execute(&self, sql: &str, row_limit: usize) -> Result<ExecutionResult, SqlError> {
        self.calls.set(self.calls.get() + 1);
        self.executor.execute(sql, row_limit)
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }
}
