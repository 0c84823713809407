//! Online synthesis: the InfoAgent/GenAgent refinement loop.
//!
//! Each iteration extracts keywords, grounds them in the column index,
//! lets the policy add missing join keys, prunes what the previous failed
//! query did not use, retrieves explored triplets as examples, generates a
//! candidate, executes it and (on a non-empty result) asks the policy
//! whether the result answers the question. The loop stops at the first
//! accepted query or after `max_iterations` attempts.

mod context;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{
    apply_expansion, ground_schema, grounding_text, prune_context, unused_components, Component, ComponentKind,
    Expansion, Origin, SchemaContext,
};

use crate::knowledge_base::{Embedder, KbError, KnowledgeBase, Triplet};
use crate::model_gateway::{strip_code_fences, Gateway, GatewayError, PolicyRequest, PolicySession, RequestKind};
use crate::prompts::{self, section};
use crate::schema_graph::{md5_hex, SchemaGraph};
use crate::sql_exec::{ExecSession, ExecutionResult, Executor};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub max_iterations: usize,
    pub top_k: usize,
    pub fidelity_check_enabled: bool,
    pub result_preview_rows: usize,
    pub result_preview_chars: usize,
    /// Rows fetched per candidate execution.
    pub row_limit: usize,
    /// Record wall-clock time per transcript step. Off by default so that
    /// transcripts are reproducible.
    pub record_timing: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            max_iterations: 5,
            top_k: 3,
            fidelity_check_enabled: true,
            result_preview_rows: 20,
            result_preview_chars: 2000,
            row_limit: 1000,
            record_timing: false,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.max_iterations == 0 {
            return Err(SynthesisError::Config("max_iterations must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(SynthesisError::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("the question is empty")]
    EmptyQuestion,
    #[error("invalid synthesis config: {0}")]
    Config(String),
    #[error("policy unavailable: {0}")]
    Policy(#[from] GatewayError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    ExecutionFailed,
    SemanticMismatch,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::ExecutionFailed => "Execution Failed",
            FailureReason::SemanticMismatch => "Semantic Mismatch",
        }
    }
}

/// What a rejected candidate leaves for the next iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackInfo {
    pub failed_sql: String,
    /// Context component ids the candidate was generated from.
    pub context: Vec<String>,
    pub reason: FailureReason,
    /// Database error text or the judge's explanation.
    pub detail: String,
    /// Context components the failed SQL does not name.
    pub unused: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthesisStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    InfoAgent,
    GenAgent,
    Executor,
}

/// One transcript entry. Prompts and responses are recorded as MD5 digests;
/// `llm_calls` and `db_calls` are the calls this step issued.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub iteration: usize,
    pub agent: Agent,
    pub step: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_digest: Option<String>,
    pub note: String,
    pub llm_calls: u64,
    pub db_calls: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterationOutcome {
    Success,
    ExecutionFailed,
    SemanticMismatch,
    /// No candidate was produced (empty context).
    NoCandidate,
}

/// Per-iteration state, for inspection and tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub keywords: Vec<String>,
    pub keyword_fallback: bool,
    /// Feedback this iteration started from.
    pub feedback_in: Option<FeedbackInfo>,
    pub retrieved: Vec<String>,
    pub expanded: Vec<String>,
    pub dropped: Vec<String>,
    pub pruned: Vec<String>,
    pub context: Vec<String>,
    pub examples: Vec<String>,
    pub candidate: Option<String>,
    pub outcome: IterationOutcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub question: String,
    pub status: SynthesisStatus,
    pub final_sql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_result: Option<ExecutionResult>,
    pub iterations_used: usize,
    pub llm_call_count: u64,
    pub db_call_count: u64,
    pub iterations: Vec<IterationTrace>,
    pub transcript: Vec<TranscriptStep>,
}

impl SynthesisResult {
    pub fn is_success(&self) -> bool {
        self.status == SynthesisStatus::Success
    }

    /// Transcript as pretty JSON; identical inputs give identical bytes.
    pub fn transcript_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Words ignored by the fallback keyword extractor.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "all", "an", "and", "any", "are", "as", "at", "be", "by", "can", "did", "do", "does", "each", "for",
    "from", "give", "has", "have", "how", "i", "in", "is", "it", "its", "list", "me", "many", "much", "of", "on", "or",
    "per", "please", "show", "that", "the", "their", "there", "these", "this", "to", "was", "were", "what", "which",
    "who", "whose", "with", "would", "you",
];

/// Whitespace tokens of the question, lowercased and stripped of edge
/// punctuation, minus [`STOPWORDS`] and duplicates.
pub fn fallback_keywords(question: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for raw in question.split_whitespace() {
        let word = raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
        if !word.is_empty() && !STOPWORDS.contains(&word.as_str()) && !out.contains(&word) {
            out.push(word);
        }
    }
    if out.is_empty() {
        // a question made only of stopwords still grounds on something
        out = question.split_whitespace().map(str::to_lowercase).collect();
    }
    out
}

pub fn keyword_request(question: &str, feedback: Option<&FeedbackInfo>) -> PolicyRequest {
    let mut req = PolicyRequest::new(RequestKind::KeywordExtraction)
        .section(section::ROLE, prompts::KEYWORD_ROLE)
        .section(section::INSTRUCTIONS, prompts::KEYWORD_INSTRUCTIONS)
        .section(section::QUESTION, question);
    if let Some(fb) = feedback {
        req = req.section(
            section::FEEDBACK,
            format!(
                "{} Failure: {} ({}). Failed SQL: {}",
                prompts::KEYWORD_RETRY_NOTE,
                fb.reason.as_str(),
                fb.detail,
                fb.failed_sql
            ),
        );
    }
    req
}

/// A JSON array of strings, lowercased; `None` when malformed or empty.
pub fn parse_keywords(response: &str) -> Option<Vec<String>> {
    let list: Vec<String> = serde_json::from_str(&strip_code_fences(response)).ok()?;
    let list: Vec<String> = list.into_iter().map(|k| k.trim().to_lowercase()).filter(|k| !k.is_empty()).collect();
    (!list.is_empty()).then_some(list)
}

/// Keywords from the policy, or the fallback tokenizer when the policy
/// fails or answers something unusable.
pub fn extract_keywords(question: &str, gateway: &Gateway) -> Result<Vec<String>, SynthesisError> {
    if question.trim().is_empty() {
        return Err(SynthesisError::EmptyQuestion);
    }
    Ok(gateway
        .complete(&keyword_request(question, None))
        .ok()
        .and_then(|r| parse_keywords(&r))
        .unwrap_or_else(|| fallback_keywords(question)))
}

pub fn expansion_request(question: &str, context: &SchemaContext, graph: &SchemaGraph) -> PolicyRequest {
    PolicyRequest::new(RequestKind::ContextExpansion)
        .section(section::ROLE, prompts::INFO_AGENT_ROLE)
        .section(
            section::INSTRUCTIONS,
            format!("{}\n{}", prompts::CONTEXT_EXPANSION_INSTRUCTION, prompts::CONTEXT_EXPANSION_FORMAT),
        )
        .section(section::QUESTION, question)
        .section(section::SCHEMA_FRAGMENTS, context.to_json(graph).to_string())
}

/// Asks the policy for missing components and admits those that exist in
/// the graph. An empty context or a policy failure leaves it unchanged.
pub fn expand_context(
    question: &str,
    context: &SchemaContext,
    graph: &SchemaGraph,
    gateway: &Gateway,
) -> SchemaContext {
    let mut out = context.clone();
    if context.is_empty() {
        return out;
    }
    match gateway.complete(&expansion_request(question, context, graph)) {
        Ok(response) => {
            apply_expansion(&mut out, graph, &response);
        }
        Err(e) => tracing::warn!(error = %e, "context expansion failed, keeping grounded context"),
    }
    out
}

fn render_examples<F>(examples: &[&Triplet<F>]) -> String {
    let mut text = String::from(prompts::GEN_AGENT_EXAMPLES_NOTE);
    for (i, t) in examples.iter().enumerate() {
        text.push_str(&format!("\n\nExample {}\nQuestion: {}\nSQL: {}", i + 1, t.description, t.sql));
    }
    text
}

/// GenAgent prompt: role, schema context, examples (omitted when there are
/// none), then the question.
pub fn generation_request<F>(
    question: &str,
    context: &SchemaContext,
    graph: &SchemaGraph,
    examples: &[&Triplet<F>],
) -> PolicyRequest {
    let mut req = PolicyRequest::new(RequestKind::SqlCompletion)
        .section(section::ROLE, prompts::GEN_AGENT_ROLE)
        .section(section::SCHEMA_CONTEXT, context.to_json(graph).to_string());
    if !examples.is_empty() {
        req = req.section(section::EXAMPLES, render_examples(examples));
    }
    req.section(section::INSTRUCTIONS, prompts::GEN_AGENT_INSTRUCTIONS).section(section::QUESTION, question)
}

/// The policy's answer, verbatim.
pub fn generate_sql<F>(
    question: &str,
    context: &SchemaContext,
    graph: &SchemaGraph,
    examples: &[&Triplet<F>],
    gateway: &Gateway,
) -> Result<String, GatewayError> {
    gateway.complete(&generation_request(question, context, graph, examples))
}

pub fn fidelity_request(question: &str, preview: &str) -> PolicyRequest {
    PolicyRequest::new(RequestKind::FidelityJudgment)
        .section(section::ROLE, prompts::FIDELITY_ROLE)
        .section(section::INSTRUCTIONS, prompts::FIDELITY_INSTRUCTIONS)
        .section(section::QUESTION, question)
        .section(section::RESULT_PREVIEW, preview)
}

/// `Ok(())` for `ALIGNED`, `Err(reason)` otherwise. Anything other than a
/// leading `ALIGNED` counts as a mismatch.
pub fn parse_fidelity(response: &str) -> Result<(), String> {
    let text = response.trim();
    let word: String = text.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    if word.eq_ignore_ascii_case("aligned") {
        return Ok(());
    }
    if word.eq_ignore_ascii_case("mismatch") {
        let reason = text[word.len()..].trim_start_matches([':', '-', ' ']).trim();
        return Err(if reason.is_empty() { "mismatch".to_string() } else { reason.to_string() });
    }
    Err(format!("unrecognized verdict `{}`", text.lines().next().unwrap_or("")))
}

/// The judged preview: header plus the first `result_preview_rows` rows.
pub fn fidelity_preview(result: &ExecutionResult, config: &SynthesisConfig) -> String {
    result.preview(config.result_preview_rows, config.result_preview_chars)
}

/// True when the result answers the question. Disabled checks pass; policy
/// failures count as not aligned.
pub fn check_fidelity(question: &str, result: &ExecutionResult, config: &SynthesisConfig, gateway: &Gateway) -> bool {
    if !config.fidelity_check_enabled {
        return true;
    }
    match gateway.complete(&fidelity_request(question, &fidelity_preview(result, config))) {
        Ok(r) => parse_fidelity(&r).is_ok(),
        Err(e) => {
            tracing::warn!(error = %e, "fidelity check failed, treating as mismatch");
            false
        }
    }
}

/// Text embedded to retrieve examples: the question plus the names of the
/// in-context tables and columns.
pub fn intent_text(question: &str, context: &SchemaContext) -> String {
    let mut text = question.trim().to_string();
    for id in context.components.keys() {
        text.push(' ');
        text.push_str(id.rsplit('.').next().unwrap_or(id));
    }
    text
}

type Attempt = (IterationTrace, Option<ExecutionResult>, SchemaContext);

struct Session<'a, F: Scalar> {
    question: &'a str,
    graph: &'a SchemaGraph,
    kb: &'a KnowledgeBase<F>,
    embedder: &'a dyn Embedder<F>,
    policy: PolicySession<'a>,
    exec: ExecSession<'a>,
    config: &'a SynthesisConfig,
    transcript: Vec<TranscriptStep>,
}

impl<F: Scalar> Session<'_, F> {
    fn record(&mut self, iteration: usize, agent: Agent, step: &str, note: String) {
        self.transcript.push(TranscriptStep {
            iteration,
            agent,
            step: step.to_string(),
            prompt_digest: None,
            response_digest: None,
            note,
            llm_calls: 0,
            db_calls: 0,
            elapsed_ms: None,
        });
    }

    fn ask(
        &mut self,
        iteration: usize,
        agent: Agent,
        step: &str,
        request: &PolicyRequest,
    ) -> Result<String, GatewayError> {
        let before = self.policy.calls();
        let start = Instant::now();
        let response = self.policy.complete(request);
        self.transcript.push(TranscriptStep {
            iteration,
            agent,
            step: step.to_string(),
            prompt_digest: Some(md5_hex(request.render().as_bytes())),
            response_digest: response.as_ref().ok().map(|r| md5_hex(r.as_bytes())),
            note: match &response {
                Ok(_) => String::new(),
                Err(e) => e.to_string(),
            },
            llm_calls: self.policy.calls() - before,
            db_calls: 0,
            elapsed_ms: self.config.record_timing.then(|| start.elapsed().as_millis() as u64),
        });
        response
    }

    /// One loop body: the trace, the accepted result (if any) and the
    /// context the candidate was generated from.
    fn iterate(&mut self, iteration: usize, feedback: Option<&FeedbackInfo>) -> Result<Attempt, SynthesisError> {
        let question = self.question;
        let (keywords, keyword_fallback) =
            match self.ask(iteration, Agent::InfoAgent, "extract_keywords", &keyword_request(question, feedback)) {
                Ok(r) => match parse_keywords(&r) {
                    Some(k) => (k, false),
                    None => (fallback_keywords(question), true),
                },
                Err(_) => (fallback_keywords(question), true),
            };

        let grounded = ground_schema(&keywords, question, self.kb, self.embedder, self.config.top_k)?;
        let retrieved = grounded.ids();
        self.record(iteration, Agent::InfoAgent, "ground_schema", format!("{} components", grounded.len()));

        let mut expanded = grounded.clone();
        let mut expansion = Expansion::default();
        if !grounded.is_empty() {
            if let Ok(r) = self.ask(
                iteration,
                Agent::InfoAgent,
                "expand_context",
                &expansion_request(question, &grounded, self.graph),
            ) {
                expansion = apply_expansion(&mut expanded, self.graph, &r);
            }
        }

        let context = prune_context(&expanded, feedback);
        let pruned: Vec<String> = expanded.ids().into_iter().filter(|id| !context.contains(id)).collect();
        if feedback.is_some() {
            self.record(iteration, Agent::InfoAgent, "prune_context", format!("removed {}", pruned.len()));
        }

        let mut trace = IterationTrace {
            iteration,
            keywords,
            keyword_fallback,
            feedback_in: feedback.cloned(),
            retrieved,
            expanded: expansion.added,
            dropped: expansion.dropped,
            pruned,
            context: context.ids(),
            examples: Vec::new(),
            candidate: None,
            outcome: IterationOutcome::NoCandidate,
            detail: String::new(),
        };
        if context.is_empty() {
            trace.detail = "no schema context".into();
            self.record(iteration, Agent::GenAgent, "generate_sql", trace.detail.clone());
            return Ok((trace, None, context));
        }

        let intent = self.embedder.embed(&intent_text(question, &context))?;
        let examples: Vec<&Triplet<F>> =
            self.kb.retrieve_triplets(&intent, self.config.top_k).into_iter().map(|(t, _)| t).collect();
        trace.examples = examples.iter().map(|t| t.id.clone()).collect();
        self.record(iteration, Agent::GenAgent, "retrieve_triplets", trace.examples.join(","));

        let response = self.ask(
            iteration,
            Agent::GenAgent,
            "generate_sql",
            &generation_request(question, &context, self.graph, &examples),
        )?;
        let candidate = strip_code_fences(&response);
        trace.candidate = Some(candidate.clone());

        let before = self.exec.calls();
        let start = Instant::now();
        let executed = self.exec.execute(&candidate, self.config.row_limit);
        let note = match &executed {
            Ok(r) => format!("{} rows{}", r.rows.len(), if r.truncated { " (truncated)" } else { "" }),
            Err(e) => e.to_string(),
        };
        self.transcript.push(TranscriptStep {
            iteration,
            agent: Agent::Executor,
            step: "execute".into(),
            prompt_digest: Some(md5_hex(candidate.as_bytes())),
            response_digest: None,
            note,
            llm_calls: 0,
            db_calls: self.exec.calls() - before,
            elapsed_ms: self.config.record_timing.then(|| start.elapsed().as_millis() as u64),
        });
        let result = match executed {
            Ok(r) if !r.rows.is_empty() => r,
            Ok(_) => {
                trace.outcome = IterationOutcome::ExecutionFailed;
                trace.detail = "empty result".into();
                return Ok((trace, None, context));
            }
            Err(e) => {
                trace.outcome = IterationOutcome::ExecutionFailed;
                trace.detail = e.to_string();
                return Ok((trace, None, context));
            }
        };

        let verdict = if self.config.fidelity_check_enabled {
            let preview = fidelity_preview(&result, self.config);
            match self.ask(iteration, Agent::GenAgent, "check_fidelity", &fidelity_request(question, &preview)) {
                Ok(r) => parse_fidelity(&r),
                Err(e) => Err(format!("fidelity check failed: {e}")),
            }
        } else {
            Ok(())
        };
        match verdict {
            Ok(()) => {
                trace.outcome = IterationOutcome::Success;
                Ok((trace, Some(result), context))
            }
            Err(reason) => {
                trace.outcome = IterationOutcome::SemanticMismatch;
                trace.detail = reason;
                Ok((trace, None, context))
            }
        }
    }
}

/// Runs the refinement loop for one question.
#[allow(clippy::too_many_arguments)]
pub fn synthesize<F: Scalar>(
    question: &str,
    graph: &SchemaGraph,
    kb: &KnowledgeBase<F>,
    embedder: &dyn Embedder<F>,
    executor: &Executor,
    gateway: &Gateway,
    config: &SynthesisConfig,
) -> Result<SynthesisResult, SynthesisError> {
    if question.trim().is_empty() {
        return Err(SynthesisError::EmptyQuestion);
    }
    config.validate()?;
    let mut session = Session {
        question,
        graph,
        kb,
        embedder,
        policy: gateway.session(),
        exec: executor.session(),
        config,
        transcript: Vec::new(),
    };
    let mut feedback: Option<FeedbackInfo> = None;
    let mut iterations = Vec::new();
    let mut accepted: Option<(String, ExecutionResult)> = None;
    let mut i = 0;
    while i < config.max_iterations && accepted.is_none() {
        i += 1;
        let (trace, result, context) = session.iterate(i, feedback.as_ref())?;
        let reason = match trace.outcome {
            IterationOutcome::ExecutionFailed => Some(FailureReason::ExecutionFailed),
            IterationOutcome::SemanticMismatch => Some(FailureReason::SemanticMismatch),
            IterationOutcome::Success | IterationOutcome::NoCandidate => None,
        };
        feedback = match (reason, &trace.candidate) {
            (Some(reason), Some(sql)) => Some(FeedbackInfo {
                failed_sql: sql.clone(),
                context: trace.context.clone(),
                reason,
                detail: trace.detail.clone(),
                unused: unused_components(&context, sql),
            }),
            _ => None,
        };
        if let (IterationOutcome::Success, Some(sql), Some(result)) = (trace.outcome, &trace.candidate, result) {
            accepted = Some((sql.clone(), result));
        }
        iterations.push(trace);
    }
    let llm_call_count = session.policy.calls();
    let db_call_count = session.exec.calls();
    let (status, final_sql, final_result) = match accepted {
        Some((sql, result)) => (SynthesisStatus::Success, Some(sql), Some(result)),
        None => (SynthesisStatus::Failure, None, None),
    };
    Ok(SynthesisResult {
        question: question.to_string(),
        status,
        final_sql,
        final_result,
        iterations_used: i,
        llm_call_count,
        db_call_count,
        iterations,
        transcript: session.transcript,
    })
}
