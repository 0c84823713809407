use std::fmt;
use std::path::{Path, PathBuf};

use rusqlite::{Connection, OpenFlags};

use super::SqlError;

/// Where a database lives.
///
/// * `:memory:` is an empty in-memory database.
/// * a path ending in `.sql` is a fixture script, executed into a fresh
///   in-memory database every time a connection is opened.
/// * anything else is a database file, opened read-only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DbLocator {
    Memory,
    Script(PathBuf),
    File(PathBuf),
}

impl DbLocator {
    pub fn parse(source: &str) -> Self {
        let source = source.trim();
        if source == ":memory:" {
            DbLocator::Memory
        } else if source.ends_with(".sql") {
            DbLocator::Script(PathBuf::from(source))
        } else {
            DbLocator::File(PathBuf::from(source))
        }
    }

    /// Logical database name: the file stem, or `memory`.
    pub fn database_name(&self) -> String {
        match self {
            DbLocator::Memory => "memory".to_string(),
            DbLocator::Script(p) | DbLocator::File(p) => {
                p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "db".to_string())
            }
        }
    }

    /// Opens a fresh connection that refuses writes.
    pub fn open_read_only(&self) -> Result<Connection, SqlError> {
        let conn = match self {
            DbLocator::Memory => Connection::open_in_memory()?,
            DbLocator::Script(path) => {
                let script = std::fs::read_to_string(path)
                    .map_err(|e| SqlError::Unreachable(format!("{}: {e}", path.display())))?;
                let conn = Connection::open_in_memory()?;
                conn.execute_batch(&script)
                    .map_err(|e| SqlError::Unreachable(format!("{}: fixture script failed: {e}", path.display())))?;
                conn
            }
            DbLocator::File(path) => {
                if !Path::new(path).exists() {
                    return Err(SqlError::Unreachable(format!("{}: no such database file", path.display())));
                }
                let flags =
                    OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI;
                Connection::open_with_flags(path, flags)
                    .map_err(|e| SqlError::Unreachable(format!("{}: {e}", path.display())))?
            }
        };
        conn.pragma_update(None, "query_only", true)?;
        Ok(conn)
    }
}

impl fmt::Display for DbLocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DbLocator::Memory => f.write_str(":memory:"),
            DbLocator::Script(p) | DbLocator::File(p) => write!(f, "{}", p.display()),
        }
    }
}
