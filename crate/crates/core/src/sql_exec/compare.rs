//! Result-set equality for execution accuracy.
//!
//! Cells are mapped to a canonical key and compared exactly on keys, which
//! keeps the relation reflexive, symmetric and transitive:
//!
//! * integers compare exactly;
//! * an integral real equals the integer of the same value (`1 == 1.0`);
//! * other reals are rounded to 7 significant digits (about 1e-6 relative),
//!   and a rounded value that lands on an integer compares as that integer;
//! * text and blobs compare exactly, and never equal numbers;
//! * NULL equals NULL.

use super::{ExecutionResult, SqlValue};

/// Largest magnitude at which every integer is exactly representable as f64.
const EXACT_INT_LIMIT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum CellKey {
    Null,
    Int(i64),
    Real(String),
    Text(String),
    Blob(Vec<u8>),
}

fn cell_key(v: &SqlValue) -> CellKey {
    match v {
        SqlValue::Null => CellKey::Null,
        SqlValue::Integer(i) => CellKey::Int(*i),
        SqlValue::Real(r) => real_key(*r),
        SqlValue::Text(s) => CellKey::Text(s.clone()),
        SqlValue::Blob(b) => CellKey::Blob(b.clone()),
    }
}

fn real_key(r: f64) -> CellKey {
    if r.is_finite() && r.fract() == 0.0 && r.abs() < EXACT_INT_LIMIT {
        return CellKey::Int(r as i64);
    }
    let rounded = format!("{r:.6e}");
    match rounded.parse::<f64>() {
        Ok(x) if x.is_finite() && x.fract() == 0.0 && x.abs() < EXACT_INT_LIMIT => CellKey::Int(x as i64),
        Ok(0.0) => CellKey::Int(0),
        _ => CellKey::Real(rounded),
    }
}

fn row_keys(rows: &[Vec<SqlValue>]) -> Vec<Vec<CellKey>> {
    rows.iter().map(|r| r.iter().map(cell_key).collect()).collect()
}

/// Compares values only; column names are ignored. With
/// `order_sensitive = false` rows are compared as multisets.
pub fn results_equal(a: &ExecutionResult, b: &ExecutionResult, order_sensitive: bool) -> bool {
    if a.columns.len() != b.columns.len() || a.rows.len() != b.rows.len() {
        return false;
    }
    let mut ka = row_keys(&a.rows);
    let mut kb = row_keys(&b.rows);
    if !order_sensitive {
        ka.sort();
        kb.sort();
    }
    ka == kb
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn res(rows: Vec<Vec<SqlValue>>) -> ExecutionResult {
        let width = rows.first().map_or(1, Vec::len);
        ExecutionResult::new((0..width).map(|i| format!("c{i}")).collect(), rows)
    }

    use SqlValue::*;

    #[test]
    fn identical_single_cells() {
        assert!(results_equal(&res(vec![vec![Integer(7)]]), &res(vec![vec![Integer(7)]]), true));
    }

    #[test]
    fn row_order_only_matters_when_requested() {
        let a = res(vec![vec![Integer(1)], vec![Integer(2)]]);
        let b = res(vec![vec![Integer(2)], vec![Integer(1)]]);
        assert!(results_equal(&a, &b, false));
        assert!(!results_equal(&a, &b, true));
    }

    #[test]
    fn integer_equals_integral_real() {
        assert!(results_equal(&res(vec![vec![Integer(1)]]), &res(vec![vec![Real(1.0)]]), true));
    }

    #[test]
    fn reals_within_tolerance() {
        assert!(results_equal(&res(vec![vec![Real(2.5)]]), &res(vec![vec![Real(2.500_000_1)]]), true));
        assert!(!results_equal(&res(vec![vec![Real(2.5)]]), &res(vec![vec![Real(2.51)]]), true));
        assert!(results_equal(&res(vec![vec![Real(1.0 / 3.0)]]), &res(vec![vec![Real(0.333_333_3)]]), true));
    }

    #[test]
    fn text_is_exact_and_not_numeric() {
        assert!(!results_equal(&res(vec![vec![Text("1".into())]]), &res(vec![vec![Integer(1)]]), true));
        assert!(!results_equal(&res(vec![vec![Text("a".into())]]), &res(vec![vec![Text("A".into())]]), true));
    }

    #[test]
    fn null_equals_null() {
        assert!(results_equal(&res(vec![vec![Null]]), &res(vec![vec![Null]]), true));
    }

    #[test]
    fn column_names_are_ignored_but_width_is_not() {
        let mut a = res(vec![vec![Integer(1)]]);
        a.columns = vec!["x".into()];
        assert!(results_equal(&a, &res(vec![vec![Integer(1)]]), true));
        assert!(!results_equal(&res(vec![vec![Integer(1), Null]]), &a, true));
    }

    #[test]
    fn multiset_counts_duplicates() {
        let a = res(vec![vec![Integer(1)], vec![Integer(1)], vec![Integer(2)]]);
        let b = res(vec![vec![Integer(1)], vec![Integer(2)], vec![Integer(2)]]);
        assert!(!results_equal(&a, &b, false));
    }

    fn value() -> impl Strategy<Value = SqlValue> {
        prop_oneof![
            Just(Null),
            (-3i64..3).prop_map(Integer),
            prop_oneof![Just(1.0), Just(1.000_000_01), Just(2.5), Just(-0.0), Just(0.1 + 0.2), Just(0.3)]
                .prop_map(Real),
            prop_oneof![Just("a"), Just("1")].prop_map(|s| Text(s.to_string())),
        ]
    }

    fn small_result() -> impl Strategy<Value = ExecutionResult> {
        prop::collection::vec(prop::collection::vec(value(), 2), 0..4)
            .prop_map(|rows| ExecutionResult::new(vec!["a".into(), "b".into()], rows))
    }

    proptest! {
        #[test]
        fn equality_is_an_equivalence(a in small_result(), b in small_result(), c in small_result(), ordered in any::<bool>()) {
            prop_assert!(results_equal(&a, &a, ordered));
            prop_assert_eq!(results_equal(&a, &b, ordered), results_equal(&b, &a, ordered));
            if results_equal(&a, &b, ordered) && results_equal(&b, &c, ordered) {
                prop_assert!(results_equal(&a, &c, ordered));
            }
        }
    }
}
