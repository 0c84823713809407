mod common;

use schemascout::explorer::{run_exploration, ExplorationConfig, IterationStatus, StopReason};
use schemascout::fixtures::RuleBasedPolicy;
use schemascout::knowledge_base::{load_kb, persist_kb, HashingEmbedder};
use schemascout::model_gateway::{FnBackend, Gateway, GatewayError, RecordingBackend, RequestKind, ScriptedBackend};
use schemascout::schema_graph::table_id;
use schemascout::sql_exec::{classify_query, ResultClass};

fn explore(
    gateway: &Gateway,
    config: ExplorationConfig,
) -> (schemascout::schema_graph::SchemaGraph, schemascout::explorer::ExplorationRun<f32>) {
    let mut graph = common::shop_graph();
    let run =
        run_exploration(&mut graph, config, gateway, &common::shop_executor(), &HashingEmbedder::default()).unwrap();
    (graph, run)
}

#[test]
fn rule_policy_reaches_the_target_with_valid_triplets() {
    let gateway = Gateway::new(RuleBasedPolicy::new(1));
    let (graph, run) = explore(&gateway, ExplorationConfig { target_triplets: 20, ..Default::default() });
    assert_eq!(run.stop_reason, StopReason::TargetReached);
    assert_eq!(run.triplets().len(), 20);
    assert!(run.tree.is_well_formed());
    let exec = common::shop_executor();
    for (i, t) in run.triplets().iter().enumerate() {
        assert_eq!(t.id, format!("t{:05}", i + 1));
        let result = exec.execute(&t.sql, 100).unwrap();
        assert_eq!(classify_query(&t.sql, &result), ResultClass::NonTrivial, "{}", t.sql);
        t.fragment.validate().unwrap();
        assert!(!t.description.is_empty());
        assert_eq!(run.tree.nodes()[t.provenance.node].success_triplets.first(), Some(&t.id));
        for table in &t.fragment.tables {
            assert!(graph.feedback_for(&table_id(table)).contains(&t.id));
        }
    }
    assert_eq!(run.llm_calls, gateway.call_count());
}

#[test]
fn failing_branch_is_excluded_after_the_threshold() {
    let gateway = common::failing_branch_gateway(3);
    let config = ExplorationConfig { target_triplets: 15, candidate_fanout: 64, ..Default::default() };
    let (_, run) = explore(&gateway, config);
    assert_eq!(run.stop_reason, StopReason::TargetReached);
    common::check_branch_exclusion(&run, 3).unwrap();
}

#[test]
fn garbage_actions_count_as_policy_faults() {
    let gateway = Gateway::new(FnBackend::new("garbage", |_req: &_| Ok("no idea".to_string())));
    let (_, run) = explore(&gateway, ExplorationConfig { max_iterations: 4, ..Default::default() });
    assert_eq!(run.stop_reason, StopReason::MaxIterations);
    assert!(run.log.iter().all(|r| r.status == IterationStatus::PolicyFault));
    assert_eq!(run.llm_calls, 8);
    assert!(run.kb.is_empty());
    assert_eq!(run.tree.len(), 1);
}

#[test]
fn backend_failure_aborts_and_keeps_partial_results() {
    let rules = RuleBasedPolicy::new(1);
    let calls = std::sync::atomic::AtomicU32::new(0);
    let gateway = Gateway::new(FnBackend::new("dies", move |req: &_| {
        if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) >= 30 {
            return Err(GatewayError::Transport { message: "connection reset".into(), transient: false });
        }
        schemascout::model_gateway::Backend::complete(&rules, req)
    }));
    let (_, run) = explore(&gateway, ExplorationConfig { target_triplets: 50, ..Default::default() });
    assert_eq!(run.stop_reason, StopReason::Aborted);
    assert!(run.aborted.as_deref().unwrap().contains("connection reset"));
    assert!(!run.kb.is_empty());
    assert!(run.kb.len() < 50);
}

#[test]
fn recorded_run_replays_identically() {
    let recorder = std::sync::Arc::new(RecordingBackend::new(RuleBasedPolicy::new(5)));
    let config = ExplorationConfig { target_triplets: 12, ..Default::default() };
    let (_, first) = explore(&Gateway::new(recorder.clone()), config.clone());
    let script = ScriptedBackend::new(recorder.records());
    let (_, replay) = explore(&Gateway::new(script), config);
    assert_eq!(first.triplets(), replay.triplets());

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    persist_kb(&first.kb, &a).unwrap();
    persist_kb(&replay.kb, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let loaded = load_kb::<f32>(&a, first.kb.dimension()).unwrap();
    assert_eq!(loaded.triplets(), first.triplets());
}

#[test]
fn scripted_descriptions_are_stored_verbatim() {
    let rules = RuleBasedPolicy::new(9);
    let gateway = Gateway::new(FnBackend::new("described", move |req: &schemascout::model_gateway::PolicyRequest| {
        if req.kind == RequestKind::NlDescription {
            return Ok("  Which users are there?  ".to_string());
        }
        schemascout::model_gateway::Backend::complete(&rules, req)
    }));
    let (_, run) = explore(&gateway, ExplorationConfig { target_triplets: 3, ..Default::default() });
    assert!(run.triplets().iter().all(|t| t.description == "Which users are there?"));
}
