#![allow(dead_code)]

use std::path::PathBuf;

use schemascout::explorer::{run_exploration, ExplorationConfig};
use schemascout::fixtures::RuleBasedPolicy;
use schemascout::knowledge_base::{HashingEmbedder, KnowledgeBase};
use schemascout::model_gateway::Gateway;
use schemascout::schema_graph::{ingest, SchemaGraph};
use schemascout::sql_exec::Executor;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn shop_db() -> String {
    fixture("shop.sql").display().to_string()
}

pub fn shop_graph() -> SchemaGraph {
    ingest(&shop_db()).expect("shop fixture ingests")
}

pub fn shop_executor() -> Executor {
    Executor::open_str(&shop_db()).expect("shop fixture opens")
}

/// Rule-policy exploration of the shop fixture, then column documents, so
/// the result is ready for synthesis.
pub fn explored_shop(seed: u64, target: usize) -> (SchemaGraph, KnowledgeBase<f32>) {
    let mut graph = shop_graph();
    let embedder = HashingEmbedder::default();
    let gateway = Gateway::new(RuleBasedPolicy::new(seed));
    let config = ExplorationConfig { target_triplets: target, ..Default::default() };
    let run = run_exploration(&mut graph, config, &gateway, &shop_executor(), &embedder).expect("exploration starts");
    assert!(run.aborted.is_none(), "{:?}", run.aborted);
    let mut kb = run.kb;
    kb.index_schema(&graph, &embedder).expect("schema indexes");
    (graph, kb)
}

/// The root action whose subtree always fails in [`failing_branch_gateway`].
pub const BAD_BRANCH: &str = "SelectUnusedColumn products.price";

/// Rule policy that steers into the `products.price` branch whenever it is
/// offered and answers every SQL request inside it with broken SQL.
pub fn failing_branch_gateway(seed: u64) -> Gateway {
    use schemascout::explorer::{Action, QueryState};
    use schemascout::model_gateway::{Backend, FnBackend, PolicyRequest, RequestKind};
    use schemascout::prompts::section;

    let rules = RuleBasedPolicy::new(seed);
    Gateway::new(FnBackend::new("failing-branch", move |req: &PolicyRequest| match req.kind {
        RequestKind::ActionSelection => {
            let text = req.get(section::CANDIDATES).unwrap_or_default();
            let mut current = "";
            let mut first_action: Option<String> = None;
            for line in text.lines() {
                if let Some(rest) = line.strip_prefix('@') {
                    current = rest.split_whitespace().next().unwrap_or("");
                    first_action = None;
                } else if let Some(path) = line.strip_prefix("path: ") {
                    if path.starts_with(BAD_BRANCH) {
                        first_action = Some(String::new());
                    }
                } else if let Some(action) = line.strip_prefix("- ") {
                    if first_action.as_deref() == Some("") {
                        return Ok(format!("@{current} {action}"));
                    }
                    if current == "0" && action == BAD_BRANCH {
                        return Ok(format!("@0 {action}"));
                    }
                }
            }
            rules.complete(req)
        }
        RequestKind::SqlCompletion => {
            let state: QueryState =
                serde_json::from_str(req.get(section::QUERY_STATE).unwrap_or("{}")).unwrap_or_default();
            match state.actions.first() {
                Some(Action::SelectUnusedColumn { column })
                    if column.table.ends_with(".products") && column.column == "price" =>
                {
                    Ok("SELECT price FROM products WHERE".to_string())
                }
                _ => rules.complete(req),
            }
        }
        _ => rules.complete(req),
    }))
}

/// Checks that the bad branch failed exactly `threshold` times and that
/// neither it nor any node below it was offered afterwards.
pub fn check_branch_exclusion(run: &schemascout::explorer::ExplorationRun<f32>, threshold: u64) -> Result<(), String> {
    let tree = &run.tree;
    let branch = tree
        .root()
        .children
        .iter()
        .copied()
        .find(|&c| {
            matches!(&tree.nodes()[c].action, Some(schemascout::explorer::Action::SelectUnusedColumn { column })
                if column.table.ends_with(".products") && column.column == "price")
        })
        .ok_or("bad branch was never expanded")?;
    let node = &tree.nodes()[branch];
    if node.failure_count != threshold {
        return Err(format!("bad branch has {} failures, expected {threshold}", node.failure_count));
    }
    let in_branch = |id: usize| tree.path(id).contains(&branch);
    let mut failures = 0;
    let mut offered_before = false;
    for record in &run.log {
        let offered = record.candidates.iter().any(|&c| in_branch(c));
        if failures >= threshold && offered {
            return Err(format!("branch re-offered at iteration {}", record.iteration));
        }
        offered_before |= offered;
        if record.new_node.is_some_and(in_branch) && record.triplet.is_none() {
            failures += 1;
        }
    }
    if !offered_before || failures != threshold {
        return Err(format!("branch offered={offered_before}, failures seen={failures}"));
    }
    Ok(())
}

/// Hand-computed first-run outcomes of the shop task suite; `t12` has a
/// broken gold query and is excluded.
pub const SHOP_SUITE_OUTCOMES: [(&str, &str); 11] = [
    ("t01", "Correct"),
    ("t02", "Correct"),
    ("t03", "Correct"),
    ("t04", "Incorrect"),
    ("t05", "Correct"),
    ("t06", "Incorrect"),
    ("t07", "Correct"),
    ("t08", "Failed"),
    ("t09", "Correct"),
    ("t10", "Correct"),
    ("t11", "Incorrect"),
];

pub fn shop_tasks() -> Vec<schemascout::evalkit::EvalTask> {
    schemascout::evalkit::load_tasks(&fixture("shop_tasks.json")).expect("task file loads")
}

pub fn shop_scripts() -> schemascout::pipeline::PolicySpec {
    schemascout::pipeline::PolicySpec::Scripted(fixture("scripts/shop_tasks"))
}
