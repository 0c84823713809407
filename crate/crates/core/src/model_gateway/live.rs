use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, GatewayError, PolicyRequest};

/// Set to `1` to allow live backends to be constructed from the environment.
pub const LIVE_FLAG: &str = "SCHEMASCOUT_LIVE";

/// Connection settings for an OpenAI-compatible HTTP endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    /// Base URL, e.g. `https://api.example.com/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable that holds the API key.
    pub api_key_env: String,
    pub timeout: Duration,
    pub retry_budget: u32,
}

impl BackendConfig {
    /// Chat settings from `MODEL_ENDPOINT`, `MODEL_NAME`, `MODEL_API_KEY`.
    pub fn chat_from_env() -> Result<Self, GatewayError> {
        Self::from_env("MODEL_ENDPOINT", "MODEL_NAME", "MODEL_API_KEY")
    }

    /// Embedding settings from `EMBED_ENDPOINT`, `EMBED_MODEL`; the key is
    /// shared with the chat endpoint.
    pub fn embedding_from_env() -> Result<Self, GatewayError> {
        Self::from_env("EMBED_ENDPOINT", "EMBED_MODEL", "MODEL_API_KEY")
    }

    fn from_env(endpoint_var: &str, model_var: &str, key_var: &str) -> Result<Self, GatewayError> {
        if std::env::var(LIVE_FLAG).as_deref() != Ok("1") {
            return Err(GatewayError::Config(format!("live backends are disabled; set {LIVE_FLAG}=1")));
        }
        let get = |var: &str| std::env::var(var).map_err(|_| GatewayError::Config(format!("{var} is not set")));
        Ok(BackendConfig {
            endpoint: get(endpoint_var)?,
            model: get(model_var)?,
            api_key_env: key_var.to_string(),
            timeout: Duration::from_secs(120),
            retry_budget: 2,
        })
    }

    fn url(&self, path: &str) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with(path) {
            base.to_string()
        } else {
            format!("{base}{path}")
        }
    }
}

/// POSTs a JSON body and returns the JSON response. 429 and 5xx responses
/// and transport failures are transient.
pub(crate) fn post_json(config: &BackendConfig, path: &str, body: &Value) -> Result<Value, GatewayError> {
    let agent: ureq::Agent =
        ureq::Agent::config_builder().timeout_global(Some(config.timeout)).http_status_as_error(false).build().into();
    let mut request = agent.post(&config.url(path)).header("Content-Type", "application/json");
    if let Ok(key) = std::env::var(&config.api_key_env) {
        request = request.header("Authorization", &format!("Bearer {key}"));
    }
    let mut response =
        request.send_json(body).map_err(|e| GatewayError::Transport { message: e.to_string(), transient: true })?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| GatewayError::Transport { message: e.to_string(), transient: true })?;
    if !(200..300).contains(&status) {
        return Err(GatewayError::Http { status, body: text.chars().take(500).collect() });
    }
    serde_json::from_str(&text).map_err(|e| GatewayError::BadResponse(e.to_string()))
}

/// Chat-completion client: one POST to `{endpoint}/chat/completions` per call.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    config: BackendConfig,
}

impl LiveBackend {
    pub fn new(config: BackendConfig) -> Self {
        LiveBackend { config }
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        Ok(Self::new(BackendConfig::chat_from_env()?))
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }
}

impl Backend for LiveBackend {
    fn complete(&self, request: &PolicyRequest) -> Result<String, GatewayError> {
        let mut messages = Vec::new();
        if let Some(system) = request.system_text() {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.user_text()}));
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
        });
        let value = post_json(&self.config, "/chat/completions", &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::BadResponse("missing choices[0].message.content".into()))
    }

    fn name(&self) -> &str {
        "live"
    }
}
