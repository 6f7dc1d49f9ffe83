use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub request_timeout_ms: u64,
    pub max_concurrent: usize,
    pub mode: GenMode,
    /// Attempts per generation step before the record is quarantined.
    pub max_attempts: usize,
}

impl Default for GenEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080/generate".into(),
            model_name: "vicuna-13b".into(),
            max_tokens: 128,
            temperature: 0.7,
            request_timeout_ms: 60_000,
            max_concurrent: 4,
            mode: GenMode::Mock,
            max_attempts: 3,
        }
    }
}

impl GenEndpointConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn remote(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            mode: GenMode::Remote,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::config("max_tokens must be > 0"));
        }
        if self.max_concurrent == 0 {
            return Err(Error::config("max_concurrent must be >= 1"));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::config("temperature must be >= 0"));
        }
        if self.max_attempts == 0 {
            return Err(Error::config("max_attempts must be >= 1"));
        }
        Ok(())
    }
}

/// Request body sent to the generation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Anything that can complete a prompt.
pub trait Completer: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String>;
}

/// Blocking JSON-over-HTTP client.
pub struct HttpCompleter {
    agent: ureq::Agent,
    url: String,
}

impl HttpCompleter {
    pub fn new(cfg: &GenEndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.request_timeout_ms)))
            .build()
            .into();
        Self {
            agent,
            url: cfg.base_url.clone(),
        }
    }
}

impl Completer for HttpCompleter {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(req)
            .map_err(|e| Error::Remote(format!("{}: {e}", self.url)))?;
        let body: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Remote(format!("{}: bad response body: {e}", self.url)))?;
        Ok(body.text)
    }
}

/// Replays canned completions, in order, for tests and offline demos.
/// Running out of script is a remote error.
pub struct ScriptedCompleter {
    script: Mutex<std::collections::VecDeque<Result<String, String>>>,
    log: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedCompleter {
    pub fn new<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_failures(texts.into_iter().map(|t| Ok(t.into())))
    }

    /// `Err(msg)` entries simulate endpoint failures.
    pub fn with_failures(script: impl IntoIterator<Item = Result<String, String>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.log.lock().expect("log lock").clone()
    }
}

impl Completer for ScriptedCompleter {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        self.log.lock().expect("log lock").push(req.clone());
        match self.script.lock().expect("script lock").pop_front() {
            Some(Ok(text)) => Ok(text),
            Some(Err(msg)) => Err(Error::Remote(msg)),
            None => Err(Error::Remote("script exhausted".into())),
        }
    }
}

impl<F> Completer for F
where
    F: Fn(&CompletionRequest) -> Result<String> + Send + Sync,
{
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        self(req)
    }
}
