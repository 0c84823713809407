//! Catalog model and introspection from catalog files or SQLite databases.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::sql_exec::DbLocator;

/// Declared type recorded for columns that carry none.
pub const UNKNOWN_TYPE: &str = "UNKNOWN";

const SAMPLE_LIMIT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    #[serde(rename = "type")]
    pub data_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, rename = "samples", skip_serializing_if = "Option::is_none")]
    pub sample_values: Option<Vec<String>>,
    /// Declared primary key or foreign-key column.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub key: bool,
    /// Foreign-key target as `table.column`, when the source reports one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<String>,
}

impl FieldDef {
    pub fn new(name: impl Into<String>, data_type: impl Into<String>) -> Self {
        FieldDef {
            name: name.into(),
            data_type: data_type.into(),
            description: None,
            sample_values: None,
            key: false,
            references: None,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    pub fn with_samples<I, S>(mut self, samples: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.sample_values = Some(samples.into_iter().map(Into::into).collect());
        self
    }

    pub fn as_key(mut self) -> Self {
        self.key = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub schema_name: String,
    pub database_name: String,
    pub fields: Vec<FieldDef>,
    pub ddl_summary: Option<String>,
}

impl TableDef {
    /// `database.schema.table`
    pub fn fqn(&self) -> String {
        format!("{}.{}.{}", self.database_name, self.schema_name, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDef {
    pub name: String,
    pub description: Option<String>,
    pub tables: Vec<TableDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogDef {
    pub database_name: String,
    pub schemas: Vec<SchemaDef>,
}

impl CatalogDef {
    pub fn tables(&self) -> impl Iterator<Item = &TableDef> {
        self.schemas.iter().flat_map(|s| s.tables.iter())
    }

    pub fn table_count(&self) -> usize {
        self.schemas.iter().map(|s| s.tables.len()).sum()
    }

    /// Checks every structural invariant of the catalog.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut schema_names = BTreeSet::new();
        let mut fqns = BTreeSet::new();
        for schema in &self.schemas {
            if !schema_names.insert(schema.name.as_str()) {
                return Err(GraphError::InvalidCatalog(format!("duplicate schema `{}`", schema.name)));
            }
            for table in &schema.tables {
                if table.schema_name != schema.name || table.database_name != self.database_name {
                    return Err(GraphError::InvalidCatalog(format!(
                        "table `{}` is filed under schema `{}` but names `{}.{}` as its parent",
                        table.name, schema.name, table.database_name, table.schema_name
                    )));
                }
                if !fqns.insert(table.fqn()) {
                    return Err(GraphError::InvalidCatalog(format!("duplicate table `{}`", table.fqn())));
                }
                if table.fields.is_empty() {
                    return Err(GraphError::EmptyTable(table.fqn()));
                }
                let mut names = BTreeSet::new();
                for field in &table.fields {
                    if field.name.is_empty() || field.data_type.is_empty() {
                        return Err(GraphError::MalformedCatalog {
                            location: format!("{}.{}", table.fqn(), field.name),
                            message: "field name and type must be non-empty".into(),
                        });
                    }
                    if !names.insert(field.name.as_str()) {
                        return Err(GraphError::InvalidCatalog(format!(
                            "duplicate field `{}` in `{}`",
                            field.name,
                            table.fqn()
                        )));
                    }
                }
            }
        }
        if fqns.is_empty() {
            return Err(GraphError::InvalidCatalog("catalog has no tables".into()));
        }
        Ok(())
    }
}

// Wire form of the catalog file. Every key is optional here so that a
// missing key can be reported with its location instead of a bare serde error.

#[derive(Debug, Serialize, Deserialize)]
struct CatalogFile {
    database: Option<String>,
    #[serde(default)]
    schemas: Vec<SchemaFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default)]
    tables: Vec<TableFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableFile {
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ddl_summary: Option<String>,
    #[serde(default)]
    fields: Vec<FieldFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldFile {
    name: Option<String>,
    #[serde(rename = "type")]
    data_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    key: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    references: Option<String>,
}

/// Parses a catalog document (see the README for the key names).
pub fn parse_catalog(text: &str) -> Result<CatalogDef, GraphError> {
    let file: CatalogFile = serde_json::from_str(text).map_err(|e| GraphError::MalformedCatalog {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let database_name = require(file.database, "database", "`database`")?;
    let mut schemas = Vec::with_capacity(file.schemas.len());
    for (si, schema) in file.schemas.into_iter().enumerate() {
        let schema_name = require(schema.name, &format!("schemas[{si}]"), "`name`")?;
        let mut tables = Vec::with_capacity(schema.tables.len());
        for (ti, table) in schema.tables.into_iter().enumerate() {
            let loc = format!("schemas[{si}] ({schema_name}).tables[{ti}]");
            let table_name = require(table.name, &loc, "`name`")?;
            let mut fields = Vec::with_capacity(table.fields.len());
            for (fi, field) in table.fields.into_iter().enumerate() {
                let floc = format!("{schema_name}.{table_name}.fields[{fi}]");
                let name = require(field.name, &floc, "`name`")?;
                let floc = format!("{schema_name}.{table_name}.{name}");
                let data_type = require(field.data_type, &floc, "`type`")?;
                fields.push(FieldDef {
                    name,
                    data_type,
                    description: field.description,
                    sample_values: field.samples,
                    key: field.key,
                    references: field.references,
                });
            }
            tables.push(TableDef {
                name: table_name,
                schema_name: schema_name.clone(),
                database_name: database_name.clone(),
                fields,
                ddl_summary: table.ddl_summary,
            });
        }
        schemas.push(SchemaDef { name: schema_name, description: schema.description, tables });
    }
    let catalog = CatalogDef { database_name, schemas };
    catalog.validate()?;
    Ok(catalog)
}

/// Renders a catalog in the catalog-file format.
pub fn catalog_to_json(catalog: &CatalogDef) -> String {
    let file = CatalogFile {
        database: Some(catalog.database_name.clone()),
        schemas: catalog
            .schemas
            .iter()
            .map(|s| SchemaFile {
                name: Some(s.name.clone()),
                description: s.description.clone(),
                tables: s
                    .tables
                    .iter()
                    .map(|t| TableFile {
                        name: Some(t.name.clone()),
                        ddl_summary: t.ddl_summary.clone(),
                        fields: t
                            .fields
                            .iter()
                            .map(|f| FieldFile {
                                name: Some(f.name.clone()),
                                data_type: Some(f.data_type.clone()),
                                description: f.description.clone(),
                                samples: f.sample_values.clone(),
                                key: f.key,
                                references: f.references.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("catalog serializes")
}

fn require(value: Option<String>, location: &str, what: &str) -> Result<String, GraphError> {
    match value {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(GraphError::MalformedCatalog {
            location: location.to_string(),
            message: format!("missing or empty {what}"),
        }),
    }
}

/// Resolves `source` to a catalog: `*.json` is read as a catalog file,
/// anything else is treated as a database locator and introspected.
pub fn introspect_catalog(source: &str) -> Result<CatalogDef, GraphError> {
    if source.ends_with(".json") {
        let text = std::fs::read_to_string(source)
            .map_err(|e| GraphError::Unreachable { source_name: source.to_string(), reason: e.to_string() })?;
        return parse_catalog(&text);
    }
    let locator = DbLocator::parse(source);
    let conn = locator
        .open_read_only()
        .map_err(|e| GraphError::Unreachable { source_name: source.to_string(), reason: e.to_string() })?;
    introspect_connection(&conn, &locator.database_name())
}

/// Reads every user table of a SQLite connection into a single-schema catalog.
pub fn introspect_connection(conn: &Connection, database_name: &str) -> Result<CatalogDef, GraphError> {
    let sqlerr =
        |e: rusqlite::Error| GraphError::Unreachable { source_name: database_name.to_string(), reason: e.to_string() };
    let mut stmt = conn
        .prepare(
            "SELECT name, COALESCE(sql, '') FROM sqlite_master \
             WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
        )
        .map_err(sqlerr)?;
    let rows: Vec<(String, String)> = stmt
        .query_map([], |r| Ok((r.get(0)?, r.get(1)?)))
        .map_err(sqlerr)?
        .collect::<Result<_, _>>()
        .map_err(sqlerr)?;

    let mut tables = Vec::with_capacity(rows.len());
    for (table_name, create_sql) in rows {
        let comments = column_comments(&create_sql);
        let foreign = foreign_keys(conn, &table_name).map_err(sqlerr)?;
        let mut info = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(&table_name))).map_err(sqlerr)?;
        let columns: Vec<(String, String, i64)> = info
            .query_map([], |r| Ok((r.get(1)?, r.get::<_, Option<String>>(2)?.unwrap_or_default(), r.get(5)?)))
            .map_err(sqlerr)?
            .collect::<Result<_, _>>()
            .map_err(sqlerr)?;
        if columns.is_empty() {
            return Err(GraphError::EmptyTable(format!("{database_name}.main.{table_name}")));
        }
        let mut fields = Vec::with_capacity(columns.len());
        for (name, declared, pk) in columns {
            let data_type = if declared.trim().is_empty() { UNKNOWN_TYPE.to_string() } else { declared };
            let references = foreign.get(&name).cloned();
            let samples = sample_values(conn, &table_name, &name).map_err(sqlerr)?;
            fields.push(FieldDef {
                description: comments.get(&name).cloned(),
                sample_values: if samples.is_empty() { None } else { Some(samples) },
                key: pk > 0 || references.is_some(),
                references,
                name,
                data_type,
            });
        }
        tables.push(TableDef {
            ddl_summary: Some(format!("Table with {} columns", fields.len())),
            name: table_name,
            schema_name: "main".to_string(),
            database_name: database_name.to_string(),
            fields,
        });
    }
    let catalog = CatalogDef {
        database_name: database_name.to_string(),
        schemas: vec![SchemaDef { name: "main".to_string(), description: None, tables }],
    };
    catalog.validate()?;
    Ok(catalog)
}

/// Double-quotes an SQL identifier.
pub fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn foreign_keys(conn: &Connection, table: &str) -> rusqlite::Result<BTreeMap<String, String>> {
    let mut stmt = conn.prepare(&format!("PRAGMA foreign_key_list({})", quote_ident(table)))?;
    let rows = stmt.query_map([], |r| {
        let target: String = r.get(2)?;
        let from: String = r.get(3)?;
        let to: Option<String> = r.get(4)?;
        Ok((from, format!("{}.{}", target, to.unwrap_or_else(|| "rowid".into()))))
    })?;
    rows.collect()
}

fn sample_values(conn: &Connection, table: &str, column: &str) -> rusqlite::Result<Vec<String>> {
    let col = quote_ident(column);
    let sql = format!(
        "SELECT DISTINCT CAST({col} AS TEXT) FROM {} WHERE {col} IS NOT NULL ORDER BY 1 LIMIT {SAMPLE_LIMIT}",
        quote_ident(table)
    );
    let mut stmt = conn.prepare(&sql)?;
    let rows = stmt.query_map([], |r| r.get::<_, Option<String>>(0))?;
    Ok(rows.filter_map(|r| r.ok().flatten()).collect())
}

/// Pulls `-- comment` text off column definition lines of a CREATE TABLE.
fn column_comments(create_sql: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for line in create_sql.lines() {
        let Some((code, comment)) = line.split_once("--") else { continue };
        let comment = comment.trim();
        if comment.is_empty() {
            continue;
        }
        let code = code.trim_start().trim_start_matches(['(', ',']).trim_start();
        let ident: String = if let Some(rest) = code.strip_prefix(['"', '`', '[']) {
            rest.chars().take_while(|c| !matches!(c, '"' | '`' | ']')).collect()
        } else {
            code.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
        };
        if !ident.is_empty() && !ident.eq_ignore_ascii_case("create") {
            out.insert(ident, comment.to_string());
        }
    }
    out
}

/// Writes `catalog` to `path` in the catalog-file format.
pub fn write_catalog(catalog: &CatalogDef, path: &Path) -> Result<(), GraphError> {
    std::fs::write(path, catalog_to_json(catalog))?;
    Ok(())
}
