//! End-to-end wiring shared by the CLI and the tests: policy selection,
//! embedder selection and the file formats around each stage.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::deployment::{synthesize, SynthesisConfig, SynthesisError, SynthesisResult};
use crate::evalkit::{run_eval, EvalError, EvalReport, EvalTask};
use crate::explorer::{run_exploration, ExplorationConfig, ExplorationRun, ExploreError};
use crate::fixtures::RuleBasedPolicy;
use crate::knowledge_base::{load_kb, persist_kb, Embedder, HashingEmbedder, KbError, KnowledgeBase, LiveEmbedder};
use crate::model_gateway::{Backend, Gateway, GatewayError, LiveBackend, RecordingBackend, ScriptedBackend, LIVE_FLAG};
use crate::schema_graph::{load_graph, serialize_graph, GraphError, SchemaGraph};
use crate::sql_exec::{Executor, SqlError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown policy `{0}` (expected live, rules or scripted:<path>)")]
    BadPolicy(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Where policy responses come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    /// OpenAI-compatible endpoint from the environment.
    Live,
    /// Seeded rule-based policy.
    Rules,
    /// A script file, or a directory of per-task scripts for evaluation.
    Scripted(PathBuf),
}

impl PolicySpec {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        match text {
            "live" => Ok(PolicySpec::Live),
            "rules" => Ok(PolicySpec::Rules),
            _ => match text.strip_prefix("scripted:") {
                Some(path) if !path.is_empty() => Ok(PolicySpec::Scripted(PathBuf::from(path))),
                _ => Err(PipelineError::BadPolicy(text.to_string())),
            },
        }
    }

    /// Script for one evaluation run: `<dir>/<task>.<run>.json` when it
    /// exists (runs numbered from 1), else `<dir>/<task>.json`. A plain
    /// file is used as is.
    pub fn script_for(&self, task_id: &str, run: usize) -> Option<PathBuf> {
        let PolicySpec::Scripted(path) = self else { return None };
        if !path.is_dir() {
            return Some(path.clone());
        }
        let per_run = path.join(format!("{task_id}.{}.json", run + 1));
        Some(if per_run.exists() { per_run } else { path.join(format!("{task_id}.json")) })
    }
}

/// Gateway for a single run.
pub fn gateway_for(spec: &PolicySpec, seed: u64) -> Result<Gateway, PipelineError> {
    Ok(match spec {
        PolicySpec::Live => {
            let backend = LiveBackend::from_env()?;
            let retries = backend.config().retry_budget;
            Gateway::new(backend).with_retry_budget(retries)
        }
        PolicySpec::Rules => Gateway::new(RuleBasedPolicy::new(seed)),
        PolicySpec::Scripted(path) => Gateway::new(ScriptedBackend::load(path)?),
    })
}

/// Gateway for run `run` of an evaluation task. Rule-based runs use
/// `seed + run`.
pub fn gateway_for_task(spec: &PolicySpec, seed: u64, task_id: &str, run: usize) -> Result<Gateway, PipelineError> {
    match spec.script_for(task_id, run) {
        Some(path) => Ok(Gateway::new(ScriptedBackend::load(&path)?)),
        None => gateway_for(spec, seed.wrapping_add(run as u64)),
    }
}

/// Handle on the responses a recording gateway has seen.
pub type Recorder = Arc<RecordingBackend<Box<dyn Backend>>>;

/// A gateway that also records every response, for `--record-script`.
pub fn recording_gateway(spec: &PolicySpec, seed: u64) -> Result<(Gateway, Recorder), PipelineError> {
    let inner: Box<dyn Backend> = match spec {
        PolicySpec::Live => Box::new(LiveBackend::from_env()?),
        PolicySpec::Rules => Box::new(RuleBasedPolicy::new(seed)),
        PolicySpec::Scripted(path) => Box::new(ScriptedBackend::load(path)?),
    };
    let recorder = Arc::new(RecordingBackend::new(inner));
    Ok((Gateway::new(recorder.clone()), recorder))
}

/// The live embedder when live mode is on and `EMBED_ENDPOINT` is set,
/// otherwise the hashing embedder.
pub fn embedder_from_env() -> Result<Box<dyn Embedder<f32>>, PipelineError> {
    let live = std::env::var(LIVE_FLAG).as_deref() == Ok("1") && std::env::var("EMBED_ENDPOINT").is_ok();
    Ok(if live { Box::new(LiveEmbedder::<f32>::from_env()?) } else { Box::new(HashingEmbedder::default()) })
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|source| PipelineError::File { path: path.to_path_buf(), source })
}

pub fn read_graph(path: &Path) -> Result<SchemaGraph, PipelineError> {
    Ok(load_graph(&read(path)?)?)
}

pub fn write_graph(graph: &SchemaGraph, path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, serialize_graph(graph))
        .map_err(|source| PipelineError::File { path: path.to_path_buf(), source })
}

/// Triplets from `kb_path` plus column documents for every field of
/// `graph`, ready for synthesis.
pub fn load_query_kb(
    kb_path: &Path,
    graph: &SchemaGraph,
    embedder: &dyn Embedder<f32>,
) -> Result<KnowledgeBase<f32>, PipelineError> {
    let mut kb = load_kb(kb_path, embedder.dimension())?;
    kb.index_schema(graph, embedder)?;
    Ok(kb)
}

/// Explores `db` and writes the triplets to `kb_out`, even when the run
/// was aborted.
pub fn explore_to_file(
    graph: &mut SchemaGraph,
    db: &str,
    gateway: &Gateway,
    embedder: &dyn Embedder<f32>,
    config: ExplorationConfig,
    kb_out: &Path,
) -> Result<ExplorationRun<f32>, PipelineError> {
    let executor = Executor::open_str(db)?;
    let run = run_exploration(graph, config, gateway, &executor, embedder)?;
    persist_kb(&run.kb, kb_out)?;
    Ok(run)
}

pub fn query(
    question: &str,
    graph: &SchemaGraph,
    kb: &KnowledgeBase<f32>,
    embedder: &dyn Embedder<f32>,
    db: &str,
    gateway: &Gateway,
    config: &SynthesisConfig,
) -> Result<SynthesisResult, PipelineError> {
    let executor = Executor::open_str(db)?;
    Ok(synthesize(question, graph, kb, embedder, &executor, gateway, config)?)
}

/// Evaluates `tasks`, building one gateway per task run.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    tasks: &[EvalTask],
    graph: &SchemaGraph,
    kb: &KnowledgeBase<f32>,
    embedder: &dyn Embedder<f32>,
    spec: &PolicySpec,
    seed: u64,
    passes: usize,
    config: &SynthesisConfig,
) -> Result<EvalReport, PipelineError> {
    let report = run_eval(
        tasks,
        passes,
        |task| Executor::open_str(&task.db),
        |task, executor, run| {
            let gateway = gateway_for_task(spec, seed, &task.id, run).map_err(|e| match e {
                PipelineError::Gateway(g) => SynthesisError::Policy(g),
                other => SynthesisError::Config(other.to_string()),
            })?;
            synthesize(&task.question, graph, kb, embedder, executor, &gateway, config)
        },
    )?;
    Ok(report)
}
