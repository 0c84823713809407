use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use schemascout::deployment::SynthesisConfig;
use schemascout::evalkit::load_tasks;
use schemascout::explorer::{run_summary, ExplorationConfig};
use schemascout::pipeline::{
    embedder_from_env, evaluate, explore_to_file, gateway_for, load_query_kb, query, read_graph, recording_gateway,
    write_graph, PolicySpec,
};
use schemascout::schema_graph::{graph_stats, ingest};

#[derive(Parser)]
#[command(name = "schemascout", version, about = "Explore a database, then answer questions about it in SQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Introspect a database or catalog file into a schema graph.
    Ingest {
        /// Database locator (`.sql` fixture, SQLite file, `:memory:`) or catalog `.json`.
        #[arg(long)]
        source: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Node, edge and field-group statistics of a graph.
    Stats {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Build a knowledge base of validated queries.
    Explore {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        db: String,
        /// `live`, `rules` or `scripted:<file>`.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 50)]
        target_triplets: usize,
        #[arg(long, default_value_t = 200)]
        max_iterations: u64,
        #[arg(long, default_value_t = 3)]
        failure_threshold: u64,
        #[arg(long, default_value_t = 4)]
        candidate_fanout: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the graph with exploration feedback here.
        #[arg(long)]
        graph_out: Option<PathBuf>,
        /// Save every policy response as a replayable script.
        #[arg(long)]
        record_script: Option<PathBuf>,
    },
    /// Answer one question.
    Query {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        db: String,
        #[arg(long)]
        question: String,
        #[arg(long, default_value_t = 5)]
        max_iters: usize,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Skip the result/question alignment check.
        #[arg(long)]
        no_fidelity: bool,
        /// Record per-step wall-clock time in the transcript.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        record_script: Option<PathBuf>,
    },
    /// Score synthesis against gold SQL.
    Eval {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        /// `live`, `rules`, `scripted:<file>` or `scripted:<dir>` with one script per task.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 1)]
        passes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        max_iters: usize,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
    },
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest { source, out } => {
            let graph = ingest(&source)?;
            write_graph(&graph, &out)?;
            let stats = graph_stats(&graph);
            println!(
                "{} nodes, {} edges, {} field groups -> {}",
                stats.total_nodes(),
                stats.total_edges(),
                stats.group_count,
                out.display()
            );
        }
        Command::Stats { graph, format } => {
            let stats = graph_stats(&read_graph(&graph)?);
            match format {
                Format::Table => print!("{}", stats.render_table()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
            }
        }
        Command::Explore {
            graph,
            db,
            policy,
            target_triplets,
            max_iterations,
            failure_threshold,
            candidate_fanout,
            out,
            seed,
            graph_out,
            record_script,
        } => {
            let spec = PolicySpec::parse(&policy)?;
            let mut schema = read_graph(&graph)?;
            let embedder = embedder_from_env()?;
            let config = ExplorationConfig {
                target_triplets,
                max_iterations,
                failure_threshold,
                candidate_fanout,
                ..Default::default()
            };
            let (gateway, recorder) = match &record_script {
                Some(_) => {
                    let (g, r) = recording_gateway(&spec, seed)?;
                    (g, Some(r))
                }
                None => (gateway_for(&spec, seed)?, None),
            };
            let run = explore_to_file(&mut schema, &db, &gateway, embedder.as_ref(), config, &out)?;
            if let (Some(path), Some(r)) = (&record_script, recorder) {
                write(path, &r.script_json())?;
            }
            if let Some(path) = &graph_out {
                write_graph(&schema, path)?;
            }
            println!("{}", serde_json::to_string_pretty(&run_summary(&run))?);
            if let Some(cause) = run.aborted {
                bail!(
                    "exploration aborted after {} iterations ({} triplets kept): {cause}",
                    run.iterations,
                    run.kb.len()
                );
            }
        }
        Command::Query {
            graph,
            kb,
            db,
            question,
            max_iters,
            top_k,
            policy,
            seed,
            transcript,
            no_fidelity,
            timing,
            record_script,
        } => {
            let spec = PolicySpec::parse(&policy)?;
            let schema = read_graph(&graph)?;
            let embedder = embedder_from_env()?;
            let kb = load_query_kb(&kb, &schema, embedder.as_ref())?;
            let config = SynthesisConfig {
                max_iterations: max_iters,
                top_k,
                fidelity_check_enabled: !no_fidelity,
                record_timing: timing,
                ..Default::default()
            };
            let (gateway, recorder) = match &record_script {
                Some(_) => {
                    let (g, r) = recording_gateway(&spec, seed)?;
                    (g, Some(r))
                }
                None => (gateway_for(&spec, seed)?, None),
            };
            let result = query(&question, &schema, &kb, embedder.as_ref(), &db, &gateway, &config)?;
            if let (Some(path), Some(r)) = (&record_script, recorder) {
                write(path, &r.script_json())?;
            }
            if let Some(path) = &transcript {
                write(path, &result.transcript_json())?;
            }
            println!(
                "status: {:?}\niterations: {}\nllm calls: {}\ndb calls: {}",
                result.status, result.iterations_used, result.llm_call_count, result.db_call_count
            );
            match (&result.final_sql, &result.final_result) {
                (Some(sql), Some(rows)) => {
                    println!("sql: {sql}\n{}", rows.preview(20, 4000));
                }
                _ => return Ok(ExitCode::from(2)),
            }
        }
        Command::Eval { tasks, graph, kb, policy, passes, out, seed, max_iters, top_k } => {
            let spec = PolicySpec::parse(&policy)?;
            let tasks = load_tasks(&tasks)?;
            let schema = read_graph(&graph)?;
            let embedder = embedder_from_env()?;
            let kb = load_query_kb(&kb, &schema, embedder.as_ref())?;
            let config = SynthesisConfig { max_iterations: max_iters, top_k, ..Default::default() };
            let report = evaluate(&tasks, &schema, &kb, embedder.as_ref(), &spec, seed, passes, &config)?;
            write(&out, &report.to_json())?;
            print!("{}", report.render_table());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
