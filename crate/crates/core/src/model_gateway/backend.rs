use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{GatewayError, PolicyRequest, RequestKind};

/// Something that turns a prompt into response text.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError>;

    fn name(&self) -> &str;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// One canned response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRecord {
    pub kind: RequestKind,
    pub response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScriptMode {
    /// Each request kind consumes its own queue, in file order.
    #[default]
    PerKind,
    /// One queue; the next record must have the request's kind.
    Sequential,
}

/// Replays canned responses. Temperature is ignored.
#[derive(Debug)]
pub struct ScriptedBackend {
    mode: ScriptMode,
    state: Mutex<ScriptState>,
}

#[derive(Debug)]
struct ScriptState {
    sequence: VecDeque<ScriptRecord>,
    per_kind: BTreeMap<RequestKind, VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new(records: Vec<ScriptRecord>) -> Self {
        Self::with_mode(records, ScriptMode::PerKind)
    }

    pub fn with_mode(records: Vec<ScriptRecord>, mode: ScriptMode) -> Self {
        let mut per_kind: BTreeMap<RequestKind, VecDeque<String>> = BTreeMap::new();
        for r in &records {
            per_kind.entry(r.kind).or_default().push_back(r.response.clone());
        }
        ScriptedBackend { mode, state: Mutex::new(ScriptState { sequence: records.into(), per_kind }) }
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (RequestKind, S)>) -> Self {
        Self::new(pairs.into_iter().map(|(kind, response)| ScriptRecord { kind, response: response.into() }).collect())
    }

    /// Reads a JSON array of `{kind, response}` records.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(parse_script(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?))
    }

    /// Responses not yet consumed.
    pub fn remaining(&self) -> usize {
        let state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        match self.mode {
            ScriptMode::PerKind => state.per_kind.values().map(VecDeque::len).sum(),
            ScriptMode::Sequential => state.sequence.len(),
        }
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptRecord>, serde_json::Error> {
    serde_json::from_str(text)
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        let mut state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        match self.mode {
            ScriptMode::PerKind => state
                .per_kind
                .get_mut(&request.kind)
                .and_then(VecDeque::pop_front)
                .ok_or(GatewayError::ScriptExhausted { kind: request.kind }),
            ScriptMode::Sequential => match state.sequence.front() {
                None => Err(GatewayError::ScriptExhausted { kind: request.kind }),
                Some(r) if r.kind != request.kind => {
                    Err(GatewayError::ScriptKindMismatch { expected: r.kind, found: request.kind })
                }
                Some(_) => Ok(state.sequence.pop_front().expect("front checked").response),
            },
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Backend from a closure; used for programmatic policies in tests.
pub struct FnBackend<F> {
    name: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&PolicyRequest) -> Result<String, GatewayError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnBackend { name: name.into(), f }
    }
}

impl<F> Backend for FnBackend<F>
where
    F: Fn(&PolicyRequest) -> Result<String, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        (self.f)(request)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Fails the first `failures` calls with a transient error, then delegates.
pub struct FlakyBackend<B> {
    inner: B,
    failures_left: AtomicU32,
}

impl<B: Backend> FlakyBackend<B> {
    pub fn new(inner: B, failures: u32) -> Self {
        FlakyBackend { inner, failures_left: AtomicU32::new(failures) }
    }
}

impl<B: Backend> Backend for FlakyBackend<B> {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        let injected =
            self.failures_left.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1)).is_ok();
        if injected {
            return Err(GatewayError::Transport { message: "injected fault".into(), transient: true });
        }
        self.inner.complete(request)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Delegates to `inner` and keeps every successful response, so a run can
/// be replayed later with [`ScriptedBackend`].
pub struct RecordingBackend<B> {
    inner: B,
    records: Mutex<Vec<ScriptRecord>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, records: Mutex::new(Vec::new()) }
    }

    pub fn records(&self) -> Vec<ScriptRecord> {
        self.records.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// The recorded responses in the script-file format.
    pub fn script_json(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("records serialize")
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        let response = self.inner.complete(request)?;
        self.records
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(ScriptRecord { kind: request.kind, response: response.clone() });
        Ok(response)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
