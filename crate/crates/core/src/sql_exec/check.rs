//! Syntax validation and light-weight static inspection of SQL text.

use sqlparser::ast::{SetExpr, Statement};
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::{Parser, ParserError};
use sqlparser::tokenizer::{Token, TokenWithSpan, Tokenizer};

use super::SqlError;

/// Accepts `sql` iff it parses as exactly one statement.
pub fn parse_check(sql: &str) -> Result<(), SqlError> {
    parse_single(sql).map(|_| ())
}

pub(crate) fn parse_single(sql: &str) -> Result<Statement, SqlError> {
    let dialect = SQLiteDialect {};
    let mut statements = Parser::parse_sql(&dialect, sql).map_err(|e| syntax_error(sql, e))?;
    match statements.len() {
        0 => Err(SqlError::Syntax { token: 0, line: 0, column: 0, message: "empty statement".into() }),
        1 => Ok(statements.remove(0)),
        n => Err(SqlError::MultiStatement(n)),
    }
}

fn syntax_error(sql: &str, err: ParserError) -> SqlError {
    let message = match &err {
        ParserError::TokenizerError(m) | ParserError::ParserError(m) => m.clone(),
        ParserError::RecursionLimitExceeded => "recursion limit exceeded".to_string(),
    };
    let tokens = significant_tokens(sql);
    // errors at end of input carry no location: point one past the last token
    let (line, column) = error_location(&message).unwrap_or_else(|| match tokens.as_ref().and_then(|t| t.last()) {
        Some(last) => (last.span.end.line, last.span.end.column),
        None => (0, 0),
    });
    let token = tokens
        .map(|tokens| {
            tokens
                .iter()
                .position(|t| (t.span.start.line, t.span.start.column) >= (line, column))
                .map_or(tokens.len() + 1, |i| i + 1)
        })
        .unwrap_or(0);
    SqlError::Syntax { token, line, column, message }
}

fn error_location(message: &str) -> Option<(u64, u64)> {
    let tail = &message[message.rfind("Line: ")? + "Line: ".len()..];
    let (line, rest) = tail.split_once(", Column: ")?;
    let column: String = rest.chars().take_while(char::is_ascii_digit).collect();
    Some((line.trim().parse().ok()?, column.parse().ok()?))
}

fn significant_tokens(sql: &str) -> Option<Vec<TokenWithSpan>> {
    let dialect = SQLiteDialect {};
    let tokens = Tokenizer::new(&dialect, sql).tokenize_with_location().ok()?;
    Some(tokens.into_iter().filter(|t| !matches!(t.token, Token::Whitespace(_))).collect())
}

/// True iff the statement is a query with a top-level ORDER BY.
pub fn has_top_level_order_by(sql: &str) -> bool {
    match parse_single(sql) {
        Ok(Statement::Query(q)) => q.order_by.is_some(),
        _ => false,
    }
}

/// True for a plain SELECT/WITH query (no DML/DDL).
pub fn is_query(sql: &str) -> bool {
    matches!(parse_single(sql), Ok(Statement::Query(q)) if !matches!(*q.body, SetExpr::Insert(_) | SetExpr::Update(_) | SetExpr::Delete(_)))
}

/// Every word token of the statement, unquoted, in order. Works on text that
/// does not parse as long as it tokenizes.
pub fn identifier_tokens(sql: &str) -> Vec<String> {
    significant_tokens(sql)
        .unwrap_or_default()
        .into_iter()
        .filter_map(|t| match t.token {
            Token::Word(w) => Some(w.value),
            _ => None,
        })
        .collect()
}

/// Matches `SELECT COUNT(...) FROM <table> [[AS] alias] [;]`: a bare count
/// over an unfiltered table.
pub fn is_bare_count(sql: &str) -> bool {
    let Some(tokens) = significant_tokens(sql) else { return false };
    let mut toks: Vec<&Token> = tokens.iter().map(|t| &t.token).collect();
    if matches!(toks.last(), Some(Token::SemiColon)) {
        toks.pop();
    }
    let word = |t: &Token, kw: &str| matches!(t, Token::Word(w) if w.quote_style.is_none() && w.value.eq_ignore_ascii_case(kw));
    let is_ident = |t: &Token| matches!(t, Token::Word(_));
    if toks.len() < 6 || !word(toks[0], "SELECT") || !word(toks[1], "COUNT") || !matches!(toks[2], Token::LParen) {
        return false;
    }
    let Some(close) = toks.iter().position(|t| matches!(t, Token::RParen)) else { return false };
    let rest = &toks[close + 1..];
    if rest.is_empty() || !word(rest[0], "FROM") {
        return false;
    }
    // table name, optionally schema-qualified
    let mut i = 1;
    if i >= rest.len() || !is_ident(rest[i]) {
        return false;
    }
    i += 1;
    while i + 1 < rest.len() && matches!(rest[i], Token::Period) && is_ident(rest[i + 1]) {
        i += 2;
    }
    match &rest[i..] {
        [] => true,
        [alias] => is_ident(alias) && !is_clause_keyword(alias),
        [as_kw, alias] => word(as_kw, "AS") && is_ident(alias),
        _ => false,
    }
}

fn is_clause_keyword(t: &Token) -> bool {
    const CLAUSES: [&str; 8] = ["WHERE", "JOIN", "GROUP", "HAVING", "LIMIT", "ORDER", "UNION", "CROSS"];
    matches!(t, Token::Word(w) if CLAUSES.iter().any(|k| w.value.eq_ignore_ascii_case(k)))
}
