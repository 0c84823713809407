mod common;

use std::time::Duration;

use schemascout::sql_exec::{
    classify_outcome, has_top_level_order_by, parse_check, results_equal, Executor, ResultClass, SqlError, SqlValue,
};

#[test]
fn fixture_scripts_load_read_only() {
    let exec = common::shop_executor();
    let r = exec.execute("SELECT COUNT(*) FROM users", 10).unwrap();
    assert_eq!(r.rows, vec![vec![SqlValue::Integer(16)]]);
    assert!(matches!(exec.execute("DELETE FROM users", 10), Err(SqlError::NotReadOnly)));
    assert!(matches!(exec.execute("CREATE TABLE x (a)", 10), Err(SqlError::NotReadOnly)));
    assert_eq!(exec.execute("SELECT COUNT(*) FROM users", 10).unwrap().rows[0][0], SqlValue::Integer(16));
}

#[test]
fn row_limit_truncates() {
    let exec = common::shop_executor();
    let r = exec.execute("SELECT order_id FROM orders", 5).unwrap();
    assert_eq!(r.rows.len(), 5);
    assert!(r.truncated);
    assert!(!exec.execute("SELECT order_id FROM orders", 40).unwrap().truncated);
}

#[test]
fn runaway_queries_time_out() {
    let exec = Executor::open_str(":memory:").unwrap().with_timeout(Duration::from_millis(50));
    let sql = "WITH RECURSIVE n(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM n) SELECT COUNT(*) FROM n";
    assert!(matches!(exec.execute(sql, 10), Err(SqlError::Timeout)));
    // the connection stays usable
    assert_eq!(exec.execute("SELECT 1", 10).unwrap().rows[0][0], SqlValue::Integer(1));
}

#[test]
fn json_items_unnest_with_json_each() {
    let exec = Executor::open_str(&common::fixture("ga4_events.sql").display().to_string()).unwrap();
    let r = exec
        .execute(
            "SELECT json_extract(i.value, '$.item_name') AS name, COUNT(*) FROM events_20201201 e, json_each(e.items) i \
             WHERE e.event_name = 'purchase' GROUP BY name ORDER BY name",
            100,
        )
        .unwrap();
    assert!(!r.rows.is_empty());
    assert_eq!(classify_outcome("SELECT ...", &Ok(r)), ResultClass::NonTrivial);
}

#[test]
fn equivalent_queries_compare_equal() {
    let exec = common::shop_executor();
    let a = exec.execute("SELECT country, COUNT(*) FROM users GROUP BY country", 100).unwrap();
    let b = exec
        .execute("SELECT u.country AS c, COUNT(u.user_id) AS n FROM users u GROUP BY 1 ORDER BY 2 DESC", 100)
        .unwrap();
    assert!(results_equal(&a, &b, false));
    let avg = exec.execute("SELECT AVG(price) FROM products", 1).unwrap();
    let sum = exec.execute("SELECT SUM(price) / COUNT(*) FROM products", 1).unwrap();
    assert!(results_equal(&avg, &sum, true));
}

#[test]
fn syntax_check_and_order_detection() {
    assert!(parse_check("SELECT a FROM t WHERE").unwrap_err().is_syntax());
    assert!(parse_check("SELECT 1; SELECT 2").unwrap_err().is_syntax());
    parse_check("SELECT json_extract(x, '$.a') FROM t, json_each(t.items)").unwrap();
    assert!(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
    assert!(!has_top_level_order_by("SELECT a FROM (SELECT a FROM t ORDER BY a) s"));
}

#[test]
fn result_classes() {
    let exec = common::shop_executor();
    let classify = |sql: &str| classify_outcome(sql, &exec.execute(sql, 100));
    assert_eq!(classify("SELECT user_name FROM users WHERE age > 200"), ResultClass::Empty);
    assert_eq!(classify("SELECT MAX(age) FROM users WHERE age > 200"), ResultClass::Trivial);
    assert_eq!(classify("SELECT COUNT(*) FROM users"), ResultClass::NonTrivial);
    assert_eq!(classify("SELECT nope FROM users"), ResultClass::Error);
    assert_eq!(classify("SELECT user_name, age FROM users WHERE age > 30"), ResultClass::NonTrivial);
}
