use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn schemascout(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schemascout"))
        .current_dir(dir)
        .args(args)
        .env_remove("SCHEMASCOUT_LIVE")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = schemascout(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn ingest_explore_query_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let db = fixture("shop.sql");
    ok(d, &["ingest", "--source", &db, "--out", "graph.json"]);
    let stats: serde_json::Value =
        serde_json::from_str(&ok(d, &["stats", "--graph", "graph.json", "--format", "json"])).unwrap();
    assert_eq!(stats["group_count"], 0);

    let summary = ok(
        d,
        &[
            "explore",
            "--graph",
            "graph.json",
            "--db",
            &db,
            "--policy",
            "rules",
            "--target-triplets",
            "10",
            "--seed",
            "3",
            "--out",
            "kb.jsonl",
            "--graph-out",
            "graph.explored.json",
            "--record-script",
            "explore.script.json",
        ],
    );
    assert!(summary.contains("\"triplets\": 10") || summary.contains("\"triplets\":10"), "{summary}");
    assert_eq!(std::fs::read_to_string(d.join("kb.jsonl")).unwrap().lines().count(), 10);

    // the recorded script replays to the same knowledge base
    ok(
        d,
        &[
            "explore",
            "--graph",
            "graph.json",
            "--db",
            &db,
            "--policy",
            "scripted:explore.script.json",
            "--target-triplets",
            "10",
            "--out",
            "kb.replay.jsonl",
        ],
    );
    assert_eq!(std::fs::read(d.join("kb.jsonl")).unwrap(), std::fs::read(d.join("kb.replay.jsonl")).unwrap());

    let script = r#"[
        {"kind": "KeywordExtraction", "response": "[\"orders\", \"shipped\"]"},
        {"kind": "ContextExpansion", "response": "NONE"},
        {"kind": "SqlCompletion", "response": "SELECT COUNT(*) FROM orders WHERE status = 'shipped'"},
        {"kind": "FidelityJudgment", "response": "ALIGNED"}
    ]"#;
    std::fs::write(d.join("q.json"), script).unwrap();
    let answer = ok(
        d,
        &[
            "query",
            "--graph",
            "graph.explored.json",
            "--kb",
            "kb.jsonl",
            "--db",
            &db,
            "--question",
            "How many orders shipped?",
            "--policy",
            "scripted:q.json",
            "--transcript",
            "t.json",
        ],
    );
    assert!(answer.contains("SELECT COUNT(*) FROM orders WHERE status = 'shipped'"), "{answer}");
    let transcript: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(transcript["status"], "Success");

    let table = ok(
        d,
        &[
            "eval",
            "--tasks",
            &fixture("shop_tasks.json"),
            "--graph",
            "graph.explored.json",
            "--kb",
            "kb.jsonl",
            "--policy",
            &format!("scripted:{}", fixture("scripts/shop_tasks")),
            "--passes",
            "3",
            "--out",
            "report.json",
        ],
    );
    assert!(table.contains("63.64%"), "{table}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["correct"], 7);
    assert_eq!(report["total"], 11);
}

#[test]
fn failed_query_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let db = fixture("shop.sql");
    ok(d, &["ingest", "--source", &db, "--out", "graph.json"]);
    std::fs::write(d.join("kb.jsonl"), "").unwrap();
    let records: Vec<String> = (0..2)
        .flat_map(|_| {
            [
                r#"{"kind": "KeywordExtraction", "response": "[\"orders\"]"}"#.to_string(),
                r#"{"kind": "ContextExpansion", "response": "NONE"}"#.to_string(),
                r#"{"kind": "SqlCompletion", "response": "SELEC"}"#.to_string(),
            ]
        })
        .collect();
    std::fs::write(d.join("q.json"), format!("[{}]", records.join(","))).unwrap();
    let out = schemascout(
        d,
        &[
            "query",
            "--graph",
            "graph.json",
            "--kb",
            "kb.jsonl",
            "--db",
            &db,
            "--question",
            "How many orders?",
            "--policy",
            "scripted:q.json",
            "--max-iters",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn live_policy_requires_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let db = fixture("shop.sql");
    ok(d, &["ingest", "--source", &db, "--out", "graph.json"]);
    let out =
        schemascout(d, &["explore", "--graph", "graph.json", "--db", &db, "--policy", "live", "--out", "kb.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SCHEMASCOUT_LIVE"));
}

#[test]
fn unknown_policy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = schemascout(
        dir.path(),
        &["explore", "--graph", "g.json", "--db", "x.sql", "--policy", "magic", "--out", "kb.jsonl"],
    );
    assert!(!out.status.success());
}
