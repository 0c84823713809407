//! Language-model access behind one interface.
//!
//! A [`Gateway`] wraps a [`Backend`] (live HTTP, scripted replay, closure),
//! validates requests, retries transient failures and counts every attempt.
//! [`PolicySession`] scopes the count to one exploration or synthesis run.

mod backend;
mod live;
mod request;

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

pub use backend::{
    parse_script, Backend, FlakyBackend, FnBackend, RecordingBackend, ScriptMode, ScriptRecord, ScriptedBackend,
};
pub(crate) use live::post_json;
pub use live::{BackendConfig, LiveBackend, LIVE_FLAG};
pub use request::{PolicyRequest, PromptSection, RequestKind, DEFAULT_TEMPERATURE};

use crate::explorer::{Action, ActionKind};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{kind} request is missing the `{section}` section")]
    MissingSection { kind: RequestKind, section: &'static str },
    #[error("script exhausted: no response left for a {kind} request")]
    ScriptExhausted { kind: RequestKind },
    #[error("script out of order: next record is {expected}, request is {found}")]
    ScriptKindMismatch { expected: RequestKind, found: RequestKind },
    #[error("transport error: {message}")]
    Transport { message: String, transient: bool },
    #[error("endpoint answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    BadResponse(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("policy fault: unparseable action `{0}`")]
    Unparseable(String),
    #[error("policy fault: action `{0}` is not legal here")]
    IllegalAction(String),
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Transport { transient, .. } => *transient,
            GatewayError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    pub fn is_policy_fault(&self) -> bool {
        matches!(self, GatewayError::Unparseable(_) | GatewayError::IllegalAction(_))
    }
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    retry_budget: u32,
    calls: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.name())
            .field("retry_budget", &self.retry_budget)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Gateway { backend: Box::new(backend), retry_budget: 0, calls: AtomicU64::new(0) }
    }

    pub fn with_retry_budget(mut self, retries: u32) -> Self {
        self.retry_budget = retries;
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Backend attempts over the gateway's lifetime.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn session(&self) -> PolicySession<'_> {
        PolicySession { gateway: self, calls: Cell::new(0) }
    }

    pub fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        self.complete_counted(request, &|| {})
    }

    /// Sends `request`, retrying transient failures up to the retry budget.
    /// `on_attempt` runs once per backend attempt.
    fn complete_counted(&self, request: &PolicyRequest, on_attempt: &dyn Fn()) -> Result<String, GatewayError> {
        if let Some(section) = request.missing_section() {
            return Err(GatewayError::MissingSection { kind: request.kind, section });
        }
        let mut attempt = 0;
        loop {
            self.calls.fetch_add(1, Ordering::Relaxed);
            on_attempt();
            match self.backend.complete(request) {
                Err(e) if e.is_transient() && attempt < self.retry_budget => {
                    tracing::warn!(kind = %request.kind, attempt, error = %e, "transient backend failure, retrying");
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Call counter for one run over a shared [`Gateway`].
pub struct PolicySession<'g> {
    gateway: &'g Gateway,
    calls: Cell<u64>,
}

impl PolicySession<'_> {
    pub fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        self.gateway.complete_counted(request, &|| self.calls.set(self.calls.get() + 1))
    }

    /// Backend attempts issued through this session.
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }
}

/// Parses one response-grammar line (see [`Action`]) against the legal set.
///
/// Leading/trailing whitespace and anything after `#` are ignored. An
/// unknown action keyword is [`GatewayError::Unparseable`]; a known keyword
/// whose arguments match no legal action (or more than one) is
/// [`GatewayError::IllegalAction`].
pub fn parse_action_response(text: &str, legal: &[Action]) -> Result<Action, GatewayError> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line.split('#').next().unwrap_or("").trim();
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let Some(kind) = tokens.first().and_then(|t| ActionKind::parse(t)) else {
        return Err(GatewayError::Unparseable(line.to_string()));
    };
    let mut hits = legal.iter().filter(|a| a.kind() == kind && a.matches_args(&tokens[1..]));
    match (hits.next(), hits.next()) {
        (Some(action), None) => Ok(action.clone()),
        _ => Err(GatewayError::IllegalAction(line.to_string())),
    }
}

/// Removes a surrounding Markdown code fence, with or without a language
/// tag, and surrounding whitespace.
pub fn strip_code_fences(text: &str) -> String {
    let trimmed = text.trim();
    let Some(rest) = trimmed.strip_prefix("```") else { return trimmed.to_string() };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::ColumnRef;
    use crate::prompts::section;

    fn legal() -> Vec<Action> {
        vec![
            Action::SelectUnusedColumn { column: ColumnRef::new("db.main.users", "age") },
            Action::IntroduceJoin {
                left: "db.main.users".into(),
                right: "db.main.orders".into(),
                left_key: ColumnRef::new("db.main.users", "id"),
                right_key: ColumnRef::new("db.main.orders", "user_id"),
            },
        ]
    }

    #[test]
    fn legal_join_parses() {
        let a = parse_action_response("IntroduceJoin users orders", &legal()).unwrap();
        assert_eq!(a, legal()[1]);
    }

    #[test]
    fn padded_response_parses_identically() {
        let a = parse_action_response("  \n\tIntroduceJoin   users orders  # users.id = orders.user_id\n", &legal())
            .unwrap();
        assert_eq!(a, legal()[1]);
    }

    #[test]
    fn sql_is_a_policy_fault() {
        let err = parse_action_response("DROP TABLE x", &legal()).unwrap_err();
        assert!(matches!(err, GatewayError::Unparseable(_)));
        assert!(err.is_policy_fault());
    }

    #[test]
    fn unknown_column_is_illegal() {
        let err = parse_action_response("SelectUnusedColumn users.shoe_size", &legal()).unwrap_err();
        assert!(matches!(err, GatewayError::IllegalAction(_)));
    }

    #[test]
    fn transient_faults_are_retried_and_counted() {
        let scripted = ScriptedBackend::from_pairs([(RequestKind::NlDescription, "ok")]);
        let gw = Gateway::new(FlakyBackend::new(scripted, 2)).with_retry_budget(2);
        let session = gw.session();
        let req = PolicyRequest::new(RequestKind::NlDescription).section(section::SQL, "SELECT 1");
        assert_eq!(session.complete(&req).unwrap(), "ok");
        assert_eq!(session.calls(), 3);
        assert_eq!(gw.call_count(), 3);
    }

    #[test]
    fn retry_budget_is_a_hard_limit() {
        let scripted = ScriptedBackend::from_pairs([(RequestKind::NlDescription, "ok")]);
        let gw = Gateway::new(FlakyBackend::new(scripted, 2)).with_retry_budget(1);
        let req = PolicyRequest::new(RequestKind::NlDescription).section(section::SQL, "SELECT 1");
        let session = gw.session();
        assert!(session.complete(&req).unwrap_err().is_transient());
        assert_eq!(session.calls(), 2);
    }

    #[test]
    fn missing_sections_are_rejected_before_dispatch() {
        let gw = Gateway::new(ScriptedBackend::from_pairs([(RequestKind::FidelityJudgment, "ALIGNED")]));
        let req = PolicyRequest::new(RequestKind::FidelityJudgment).section(section::QUESTION, "q");
        assert!(matches!(gw.complete(&req), Err(GatewayError::MissingSection { section: "result_preview", .. })));
        assert_eq!(gw.call_count(), 0);
    }

    #[test]
    fn code_fences_are_stripped() {
        assert_eq!(strip_code_fences("```sql\nSELECT 1;\n```"), "SELECT 1;");
        assert_eq!(strip_code_fences("  SELECT 2 "), "SELECT 2");
    }

    #[test]
    fn default_temperature() {
        assert_eq!(PolicyRequest::new(RequestKind::SqlCompletion).temperature, 0.7);
    }
}
