//! Evaluation harness: execution accuracy, pass@K, difficulty buckets and
//! call counters over a task file of (question, gold SQL) pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deployment::{SynthesisError, SynthesisResult};
use crate::sql_exec::{has_top_level_order_by, results_equal, DbLocator, Executor, SqlError};

/// Rows fetched when comparing predicted and gold results.
pub const SCORING_ROW_LIMIT: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("task file has no tasks")]
    NoTasks,
    #[error("no task has a valid gold query")]
    NoValidTasks,
    #[error("gold SQL of task `{id}` fails: {source}")]
    InvalidGold { id: String, source: SqlError },
    #[error("passes must be at least 1")]
    ZeroPasses,
    #[error("malformed task file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// Tokens for difficulty bucketing: runs of alphanumerics and `_`, plus
/// every other non-whitespace character on its own.
pub fn sql_tokens(sql: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in sql.char_indices() {
        let word = c.is_alphanumeric() || c == '_';
        match (word, start) {
            (true, None) => start = Some(i),
            (true, Some(_)) => {}
            (false, s) => {
                if let Some(s) = s {
                    out.push(&sql[s..i]);
                    start = None;
                }
                if !c.is_whitespace() {
                    out.push(&sql[i..i + c.len_utf8()]);
                }
            }
        }
    }
    if let Some(s) = start {
        out.push(&sql[s..]);
    }
    out
}

pub fn token_count(sql: &str) -> usize {
    sql_tokens(sql).len()
}

/// Easy below 80 tokens, Medium up to 159, Hard from 160.
pub fn bucket_difficulty(sql: &str) -> Difficulty {
    match token_count(sql) {
        0..=79 => Difficulty::Easy,
        80..=159 => Difficulty::Medium,
        _ => Difficulty::Hard,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalTask {
    pub id: String,
    pub question: String,
    pub gold_sql: String,
    /// Database locator (see [`DbLocator`]).
    pub db: String,
}

impl EvalTask {
    pub fn difficulty(&self) -> Difficulty {
        bucket_difficulty(&self.gold_sql)
    }
}

/// Reads a JSON array of tasks. Relative database paths are resolved
/// against the task file's directory.
pub fn load_tasks(path: &Path) -> Result<Vec<EvalTask>, EvalError> {
    let mut tasks: Vec<EvalTask> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if tasks.is_empty() {
        return Err(EvalError::NoTasks);
    }
    let base = path.parent().unwrap_or(Path::new("."));
    for t in &mut tasks {
        if DbLocator::parse(&t.db) != DbLocator::Memory && Path::new(&t.db).is_relative() {
            t.db = base.join(&t.db).to_string_lossy().into_owned();
        }
    }
    Ok(tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskOutcome {
    Correct,
    Incorrect,
    /// Synthesis gave up (or errored) without a query.
    Failed,
}

/// Executes the gold query; an error makes the task invalid.
pub fn check_gold(task: &EvalTask, executor: &Executor) -> Result<(), EvalError> {
    executor
        .execute(&task.gold_sql, SCORING_ROW_LIMIT)
        .map(|_| ())
        .map_err(|source| EvalError::InvalidGold { id: task.id.clone(), source })
}

/// Compares the predicted query's result with the gold result, order
/// sensitive iff the gold query has a top-level ORDER BY.
pub fn score_task(task: &EvalTask, result: &SynthesisResult, executor: &Executor) -> Result<TaskOutcome, EvalError> {
    let gold = executor
        .execute(&task.gold_sql, SCORING_ROW_LIMIT)
        .map_err(|source| EvalError::InvalidGold { id: task.id.clone(), source })?;
    let Some(predicted_sql) = result.final_sql.as_deref().filter(|_| result.is_success()) else {
        return Ok(TaskOutcome::Failed);
    };
    let Ok(predicted) = executor.execute(predicted_sql, SCORING_ROW_LIMIT) else {
        return Ok(TaskOutcome::Incorrect);
    };
    let ordered = has_top_level_order_by(&task.gold_sql);
    Ok(if results_equal(&predicted, &gold, ordered) { TaskOutcome::Correct } else { TaskOutcome::Incorrect })
}

/// True iff one of the first `k` outcomes is correct.
pub fn pass_at_k(outcomes: &[TaskOutcome], k: usize) -> bool {
    outcomes.iter().take(k).any(|o| *o == TaskOutcome::Correct)
}

/// Runs `runner` up to `k` times (stopping at the first correct run) and
/// reports whether any run was correct.
pub fn pass_at_k_with(
    task: &EvalTask,
    k: usize,
    executor: &Executor,
    mut runner: impl FnMut(&EvalTask, usize) -> Result<SynthesisResult, SynthesisError>,
) -> Result<bool, EvalError> {
    for run in 0..k {
        let outcome = match runner(task, run) {
            Ok(r) => score_task(task, &r, executor)?,
            Err(_) => TaskOutcome::Failed,
        };
        if outcome == TaskOutcome::Correct {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub outcome: TaskOutcome,
    pub final_sql: Option<String>,
    pub iterations_used: usize,
    pub llm_calls: u64,
    pub db_calls: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn from_result(outcome: TaskOutcome, r: &SynthesisResult) -> Self {
        RunRecord {
            outcome,
            final_sql: r.final_sql.clone(),
            iterations_used: r.iterations_used,
            llm_calls: r.llm_call_count,
            db_calls: r.db_call_count,
            error: None,
        }
    }

    pub fn from_error(e: &SynthesisError) -> Self {
        RunRecord {
            outcome: TaskOutcome::Failed,
            final_sql: None,
            iterations_used: 0,
            llm_calls: 0,
            db_calls: 0,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskReport {
    pub id: String,
    pub question: String,
    pub difficulty: Difficulty,
    pub gold_tokens: usize,
    /// Outcome of the first run; this is what EX counts.
    pub outcome: TaskOutcome,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedTask {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub total: usize,
    pub correct: usize,
    pub ex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub passes: usize,
    pub total: usize,
    pub correct: usize,
    pub ex: f64,
    pub buckets: BTreeMap<Difficulty, BucketReport>,
    /// Fraction of tasks solved within `k` runs, for `k` in `1..=passes`.
    pub pass_at_k: BTreeMap<usize, f64>,
    pub runs: u64,
    pub total_llm_calls: u64,
    pub total_db_calls: u64,
    /// Means over every run of every evaluated task.
    pub mean_llm_calls: f64,
    pub mean_db_calls: f64,
    pub tasks: Vec<TaskReport>,
    pub excluded: Vec<ExcludedTask>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Aggregates per-task outcomes. Pure: the same inputs give the same report.
pub fn build_report(tasks: Vec<TaskReport>, excluded: Vec<ExcludedTask>, passes: usize) -> EvalReport {
    let correct = tasks.iter().filter(|t| t.outcome == TaskOutcome::Correct).count();
    let mut buckets: BTreeMap<Difficulty, BucketReport> = BTreeMap::new();
    for t in &tasks {
        let b = buckets.entry(t.difficulty).or_insert(BucketReport { total: 0, correct: 0, ex: 0.0 });
        b.total += 1;
        b.correct += usize::from(t.outcome == TaskOutcome::Correct);
    }
    for b in buckets.values_mut() {
        b.ex = ratio(b.correct, b.total);
    }
    let pass_at_k = (1..=passes)
        .map(|k| {
            let solved =
                tasks.iter().filter(|t| pass_at_k(&t.runs.iter().map(|r| r.outcome).collect::<Vec<_>>(), k)).count();
            (k, ratio(solved, tasks.len()))
        })
        .collect();
    let runs: u64 = tasks.iter().map(|t| t.runs.len() as u64).sum();
    let total_llm_calls: u64 = tasks.iter().flat_map(|t| &t.runs).map(|r| r.llm_calls).sum();
    let total_db_calls: u64 = tasks.iter().flat_map(|t| &t.runs).map(|r| r.db_calls).sum();
    let mean = |total: u64| if runs == 0 { 0.0 } else { total as f64 / runs as f64 };
    EvalReport {
        passes,
        total: tasks.len(),
        correct,
        ex: ratio(correct, tasks.len()),
        buckets,
        pass_at_k,
        runs,
        total_llm_calls,
        total_db_calls,
        mean_llm_calls: mean(total_llm_calls),
        mean_db_calls: mean(total_db_calls),
        tasks,
        excluded,
    }
}

/// Evaluates every task: gold validation, `passes` synthesis runs, scoring.
/// `executor_for` opens a task's database (once per distinct locator);
/// `runner` performs synthesis run `run` of a task.
pub fn run_eval(
    tasks: &[EvalTask],
    passes: usize,
    executor_for: impl Fn(&EvalTask) -> Result<Executor, SqlError>,
    mut runner: impl FnMut(&EvalTask, &Executor, usize) -> Result<SynthesisResult, SynthesisError>,
) -> Result<EvalReport, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::NoTasks);
    }
    if passes == 0 {
        return Err(EvalError::ZeroPasses);
    }
    let mut executors: BTreeMap<String, Result<Executor, String>> = BTreeMap::new();
    let mut reports = Vec::new();
    let mut excluded = Vec::new();
    for task in tasks {
        let executor =
            executors.entry(task.db.clone()).or_insert_with(|| executor_for(task).map_err(|e| e.to_string()));
        let executor = match executor {
            Ok(e) => &*e,
            Err(e) => {
                tracing::warn!(task = %task.id, error = %e, "database unavailable, task excluded");
                excluded.push(ExcludedTask { id: task.id.clone(), reason: e.clone() });
                continue;
            }
        };
        if let Err(e) = check_gold(task, executor) {
            tracing::warn!(task = %task.id, error = %e, "invalid gold query, task excluded");
            excluded.push(ExcludedTask { id: task.id.clone(), reason: e.to_string() });
            continue;
        }
        let mut runs = Vec::with_capacity(passes);
        for run in 0..passes {
            let record = match runner(task, executor, run) {
                Ok(result) => RunRecord::from_result(score_task(task, &result, executor)?, &result),
                Err(e) => RunRecord::from_error(&e),
            };
            runs.push(record);
        }
        reports.push(TaskReport {
            id: task.id.clone(),
            question: task.question.clone(),
            difficulty: task.difficulty(),
            gold_tokens: token_count(&task.gold_sql),
            outcome: runs[0].outcome,
            runs,
        });
    }
    if reports.is_empty() {
        return Err(EvalError::NoValidTasks);
    }
    Ok(build_report(reports, excluded, passes))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plain-text summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let pct = |x: f64| format!("{:.2}%", x * 100.0);
        let _ = writeln!(out, "{:<12} {:>6} {:>8} {:>9}", "bucket", "tasks", "correct", "EX");
        for (d, b) in &self.buckets {
            let _ = writeln!(out, "{:<12} {:>6} {:>8} {:>9}", format!("{d:?}"), b.total, b.correct, pct(b.ex));
        }
        let _ = writeln!(out, "{:<12} {:>6} {:>8} {:>9}", "overall", self.total, self.correct, pct(self.ex));
        for (k, v) in &self.pass_at_k {
            let _ = writeln!(out, "pass@{k:<7} {:>25}", pct(*v));
        }
        let _ = writeln!(out, "mean LLM calls {:>22.3}", self.mean_llm_calls);
        let _ = writeln!(out, "mean DB calls {:>23.3}", self.mean_db_calls);
        if !self.excluded.is_empty() {
            let _ = writeln!(out, "excluded tasks: {}", self.excluded.len());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_counts_punctuation() {
        assert_eq!(sql_tokens("SELECT 1"), vec!["SELECT", "1"]);
        assert_eq!(
            sql_tokens("SELECT a.b, COUNT(*) FROM t;"),
            vec!["SELECT", "a", ".", "b", ",", "COUNT", "(", "*", ")", "FROM", "t", ";"]
        );
        assert_eq!(token_count("x>='y_z'"), 6);
    }

    #[test]
    fn bucket_thresholds() {
        assert_eq!(bucket_difficulty("SELECT 1"), Difficulty::Easy);
        let body = |n: usize| (0..n).map(|i| format!("c{i}")).collect::<Vec<_>>().join(" ");
        assert_eq!(bucket_difficulty(&body(79)), Difficulty::Easy);
        assert_eq!(bucket_difficulty(&body(80)), Difficulty::Medium);
        assert_eq!(bucket_difficulty(&body(159)), Difficulty::Medium);
        assert_eq!(bucket_difficulty(&body(160)), Difficulty::Hard);
    }

    fn task(id: &str, d: Difficulty, outcomes: &[TaskOutcome]) -> TaskReport {
        TaskReport {
            id: id.into(),
            question: String::new(),
            difficulty: d,
            gold_tokens: 0,
            outcome: outcomes[0],
            runs: outcomes
                .iter()
                .map(|o| RunRecord {
                    outcome: *o,
                    final_sql: None,
                    iterations_used: 1,
                    llm_calls: 3,
                    db_calls: 1,
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn three_of_four_is_75_percent() {
        use TaskOutcome::*;
        let r = build_report(
            vec![
                task("a", Difficulty::Easy, &[Correct]),
                task("b", Difficulty::Easy, &[Correct]),
                task("c", Difficulty::Medium, &[Correct]),
                task("d", Difficulty::Medium, &[Incorrect]),
            ],
            vec![],
            1,
        );
        assert_eq!(r.ex, 0.75);
        assert_eq!(r.buckets[&Difficulty::Easy].ex, 1.0);
        assert_eq!(r.buckets[&Difficulty::Medium].ex, 0.5);
        assert!(!r.buckets.contains_key(&Difficulty::Hard));
        assert_eq!(r.mean_llm_calls, 3.0);
        assert_eq!(EvalReport::from_json(&r.to_json()).unwrap(), r);
        assert!(r.render_table().contains("75.00%"));
    }

    #[test]
    fn pass_at_k_is_monotone() {
        use TaskOutcome::*;
        let outcomes = [Failed, Incorrect, Correct, Incorrect];
        assert!(!pass_at_k(&outcomes, 2));
        assert!(pass_at_k(&outcomes, 3));
        assert!(pass_at_k(&outcomes, 8));
        for k in 1..8 {
            assert!(pass_at_k(&outcomes, k + 1) >= pass_at_k(&outcomes, k));
        }
    }
}
