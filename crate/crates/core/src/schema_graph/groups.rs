//! Shared Field Group discovery: signature classes, then greedy
//! non-overlapping selection.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::signature::{canonical_string, generate_signature};
use super::{CatalogDef, FieldDef, GraphError, SchemaSignature};

/// A signature class before selection. May have a single member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateGroup {
    pub signature: SchemaSignature,
    pub fields: Vec<FieldDef>,
    /// Fully-qualified table names, lexicographic.
    pub member_tables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedFieldGroup {
    pub signature: SchemaSignature,
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub member_tables: Vec<String>,
    pub field_count: usize,
}

impl SharedFieldGroup {
    pub fn from_candidate(candidate: &CandidateGroup) -> Self {
        SharedFieldGroup {
            name: group_name(&candidate.signature),
            signature: candidate.signature.clone(),
            fields: candidate.fields.clone(),
            member_tables: candidate.member_tables.clone(),
            field_count: candidate.fields.len(),
        }
    }
}

pub fn group_name(signature: &SchemaSignature) -> String {
    format!("FieldGroup_{}", signature.short())
}

/// Partitions the catalog's tables by the signature of their full field set.
///
/// Output is ordered by signature. Two tables whose canonical strings differ
/// but hash equal abort with [`GraphError::SignatureCollision`].
pub fn find_candidate_groups(catalog: &CatalogDef) -> Result<Vec<CandidateGroup>, GraphError> {
    let mut classes: BTreeMap<SchemaSignature, (String, String, CandidateGroup)> = BTreeMap::new();
    let mut tables: Vec<_> = catalog.tables().collect();
    tables.sort_by_key(|t| t.fqn());
    for table in tables {
        let fqn = table.fqn();
        let canonical = canonical_string(&table.fields);
        let signature = generate_signature(&table.fields);
        match classes.get_mut(&signature) {
            Some((first_canonical, first_table, candidate)) => {
                if *first_canonical != canonical {
                    return Err(GraphError::SignatureCollision {
                        signature: signature.to_string(),
                        first: first_table.clone(),
                        second: fqn,
                    });
                }
                candidate.member_tables.push(fqn);
            }
            None => {
                let candidate = CandidateGroup {
                    signature: signature.clone(),
                    fields: table.fields.clone(),
                    member_tables: vec![fqn.clone()],
                };
                classes.insert(signature, (canonical, fqn, candidate));
            }
        }
    }
    Ok(classes.into_values().map(|(_, _, c)| c).collect())
}

/// Greedy selection of non-overlapping groups.
///
/// Candidates with fewer than two members are dropped. Survivors are ranked by
/// member count (desc), then field count (desc), then signature (asc); a
/// candidate is admitted only if none of its members was claimed earlier.
pub fn select_groups(candidates: &[CandidateGroup]) -> Vec<SharedFieldGroup> {
    let mut ranked: Vec<&CandidateGroup> = candidates.iter().filter(|c| c.member_tables.len() >= 2).collect();
    ranked.sort_by_key(|c| (Reverse(c.member_tables.len()), Reverse(c.fields.len()), c.signature.clone()));

    let mut assigned: BTreeSet<&str> = BTreeSet::new();
    let mut selected = Vec::new();
    for candidate in ranked {
        if candidate.member_tables.iter().any(|t| assigned.contains(t.as_str())) {
            continue;
        }
        assigned.extend(candidate.member_tables.iter().map(String::as_str));
        selected.push(SharedFieldGroup::from_candidate(candidate));
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema_graph::{SchemaDef, TableDef};

    pub(crate) fn table(name: &str, fields: &[(&str, &str)]) -> TableDef {
        TableDef {
            name: name.into(),
            schema_name: "s".into(),
            database_name: "d".into(),
            fields: fields.iter().map(|(n, t)| FieldDef::new(*n, *t)).collect(),
            ddl_summary: None,
        }
    }

    fn catalog(tables: Vec<TableDef>) -> CatalogDef {
        CatalogDef {
            database_name: "d".into(),
            schemas: vec![SchemaDef { name: "s".into(), description: None, tables }],
        }
    }

    fn candidate(tag: char, members: &[&str], nfields: usize) -> CandidateGroup {
        CandidateGroup {
            signature: SchemaSignature::parse(&tag.to_string().repeat(32)).unwrap(),
            fields: (0..nfields).map(|i| FieldDef::new(format!("f{i}"), "INTEGER")).collect(),
            member_tables: members.iter().map(|m| m.to_string()).collect(),
        }
    }

    #[test]
    fn sharded_tables_collapse_into_one_candidate() {
        let cols = [("ts", "TIMESTAMP"), ("event", "TEXT"), ("user_id", "INTEGER")];
        let mut tables: Vec<TableDef> = (0..30).map(|i| table(&format!("events_{i:02}"), &cols)).collect();
        // column order must not matter
        tables[7].fields.reverse();
        let candidates = find_candidate_groups(&catalog(tables)).unwrap();
        assert_eq!(candidates.len(), 1);
        assert_eq!(candidates[0].member_tables.len(), 30);
        assert_eq!(candidates[0].member_tables[0], "d.s.events_00");
    }

    #[test]
    fn type_difference_splits_candidates() {
        let a = table("a", &[("x", "INTEGER"), ("y", "TEXT")]);
        let b = table("b", &[("x", "INTEGER"), ("y", "VARCHAR")]);
        let candidates = find_candidate_groups(&catalog(vec![a, b])).unwrap();
        assert_eq!(candidates.len(), 2);
        assert!(select_groups(&candidates).is_empty());
    }

    #[test]
    fn singleton_candidate_is_filtered() {
        let candidates = find_candidate_groups(&catalog(vec![table("solo", &[("x", "INTEGER")])])).unwrap();
        assert_eq!(candidates.len(), 1);
        assert_eq!(candidates[0].member_tables.len(), 1);
        assert!(select_groups(&candidates).is_empty());
    }

    #[test]
    fn overlapping_candidate_loses_to_larger_one() {
        // gA: 3 tables, 5 fields; gB: 2 tables sharing t2 with gA.
        let ga = candidate('a', &["t1", "t2", "t3"], 5);
        let gb = candidate('b', &["t2", "t4"], 7);
        let selected = select_groups(&[gb, ga]);
        assert_eq!(selected.len(), 1);
        assert_eq!(selected[0].member_tables, vec!["t1", "t2", "t3"]);
        assert_eq!(selected[0].field_count, 5);
    }

    #[test]
    fn disjoint_candidates_are_ordered_by_size() {
        let small = candidate('1', &["x1", "x2"], 3);
        let large = candidate('2', &["y1", "y2", "y3", "y4"], 1);
        let selected = select_groups(&[small, large]);
        assert_eq!(selected.iter().map(|g| g.member_tables.len()).collect::<Vec<_>>(), vec![4, 2]);
    }

    #[test]
    fn field_count_then_signature_break_ties() {
        let few = candidate('9', &["a1", "a2"], 2);
        let many = candidate('8', &["b1", "b2"], 6);
        let tie_hi = candidate('f', &["c1", "c2"], 6);
        let selected = select_groups(&[few, tie_hi, many]);
        let sigs: Vec<char> = selected.iter().map(|g| g.signature.as_str().chars().next().unwrap()).collect();
        assert_eq!(sigs, vec!['8', 'f', '9']);
        assert_eq!(selected[0].name, "FieldGroup_88888888");
    }

    #[test]
    fn selection_is_order_independent() {
        let cands = vec![
            candidate('a', &["t1", "t2", "t3"], 5),
            candidate('b', &["t3", "t4"], 5),
            candidate('c', &["t5", "t6"], 5),
            candidate('d', &["t6", "t7", "t8"], 2),
        ];
        let forward = select_groups(&cands);
        let mut reversed = cands.clone();
        reversed.reverse();
        assert_eq!(forward, select_groups(&reversed));
        let mut seen = BTreeSet::new();
        for g in &forward {
            for t in &g.member_tables {
                assert!(seen.insert(t.clone()), "{t} assigned twice");
            }
        }
    }
}
