//! Backends that answer prompts: a deterministic oracle, a recorded transcript, and a
//! remote chat-completion endpoint.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use gamebot_core::exact::{ExactAgent, Solver};
use gamebot_core::search::{minimax, Difficulty, SearchConfig};
use gamebot_core::{GameKind, GameSpec, GameState};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const API_KEY_VAR: &str = "NEMO_LLM_API_KEY";
pub const BASE_URL_VAR: &str = "NEMO_LLM_BASE_URL";
pub const MODEL_VAR: &str = "NEMO_LLM_MODEL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle,
    Replay,
    Remote,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Oracle => "oracle",
            BackendKind::Replay => "replay",
            BackendKind::Remote => "remote",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("transcript exhausted after {0} responses")]
    Exhausted(usize),
    #[error("malformed backend data: {0}")]
    Malformed(String),
    #[error("missing configuration: {0}")]
    Config(String),
}

/// One prompt sent to a backend, with the state it describes.
#[derive(Clone, Copy, Debug)]
pub struct Request<'a> {
    pub function: &'a str,
    pub prompt: &'a str,
    pub spec: &'a GameSpec,
    pub state: &'a GameState,
}

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, request: &Request<'_>) -> Result<String, BackendError>;
}

/// Answers from the exact solvers, or from hard-tier search for Mancala.
#[derive(Default)]
pub struct OracleBackend {
    solvers: Mutex<HashMap<String, Solver>>,
}

impl OracleBackend {
    pub fn new() -> Self {
        Self::default()
    }

    fn tictactoe_move(&self, spec: &GameSpec, state: &GameState) -> Option<(u32, i8)> {
        let mut solvers = self.solvers.lock().unwrap();
        let solver = solvers
            .entry(spec.id())
            .or_insert_with(|| Solver::new(*spec));
        let a = solver.best_action(state)?;
        Some((a, solver.value(state)))
    }
}

impl Backend for OracleBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Oracle
    }

    fn complete(&self, req: &Request<'_>) -> Result<String, BackendError> {
        let none = || BackendError::Malformed("no move in a terminal state".into());
        Ok(match req.spec.kind() {
            GameKind::TicTacToe => {
                let (cell, value) = self.tictactoe_move(req.spec, req.state).ok_or_else(none)?;
                let verdict = match value {
                    1 => "forces a win",
                    0 => "holds the draw",
                    _ => "delays the loss longest",
                };
                format!("Play Cell {cell}. With best play this {verdict}.")
            }
            GameKind::Nim => {
                let t = ExactAgent::choose(req.state).ok_or_else(none)?;
                let why = ExactAgent::explain(req.state).unwrap_or_default();
                format!(
                    "Take {t} {}. {why}",
                    if t == 1 { "stone" } else { "stones" }
                )
            }
            GameKind::Euclid => {
                let m = ExactAgent::choose(req.state).ok_or_else(none)?;
                let why = ExactAgent::explain(req.state).unwrap_or_default();
                format!("Multiplier {m}. {why}")
            }
            GameKind::Mancala => {
                let cfg = SearchConfig::for_spec(req.spec, Difficulty::Hard.depth());
                let r = minimax(req.spec, req.state, &cfg);
                let pit = r.action.ok_or_else(none)?;
                format!(
                    "Play Pit {pit}. A {}-ply search scores it {:.2}.",
                    cfg.depth, r.value
                )
            }
        })
    }
}

/// One recorded exchange.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt: String,
    pub response: String,
}

/// Replays recorded responses in order, ignoring the prompt. Lines that do not parse are
/// kept and reported as malformed when their turn comes.
pub struct ReplayBackend {
    entries: Vec<Result<TranscriptEntry, String>>,
    next: Mutex<usize>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        ReplayBackend {
            entries: entries.into_iter().map(Ok).collect(),
            next: Mutex::new(0),
        }
    }

    /// Newline-delimited `{"prompt": .., "response": ..}` records; blank lines are skipped.
    pub fn from_ndjson(text: &str) -> Self {
        ReplayBackend {
            entries: text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(|e| format!("{e}: {l}")))
                .collect(),
            next: Mutex::new(0),
        }
    }

    pub fn from_path(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_ndjson(&std::fs::read_to_string(path)?))
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - *self.next.lock().unwrap()
    }
}

impl Backend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn complete(&self, _: &Request<'_>) -> Result<String, BackendError> {
        let mut next = self.next.lock().unwrap();
        let entry = self
            .entries
            .get(*next)
            .ok_or(BackendError::Exhausted(*next))?;
        *next += 1;
        entry
            .as_ref()
            .map(|e| e.response.clone())
            .map_err(|e| BackendError::Malformed(e.clone()))
    }
}

/// Settings for a chat-completion endpoint. The key is never printed.
#[derive(Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_concurrency: usize,
    pub system_prompt: Option<String>,
}

impl fmt::Debug for RemoteConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteConfig")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("api_key", &"<redacted>")
            .field("temperature", &self.temperature)
            .field("timeout", &self.timeout)
            .field("max_concurrency", &self.max_concurrency)
            .finish()
    }
}

impl RemoteConfig {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
    ) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key: api_key.into(),
            temperature: 0.0,
            timeout: Duration::from_secs(30),
            max_concurrency: DEFAULT_CONCURRENCY,
            system_prompt: Some(
                "You are a game-playing agent. Answer with the move first, then a short reason."
                    .into(),
            ),
        }
    }

    /// Reads the key, endpoint and model from the environment. Only the key is required.
    pub fn from_env() -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| BackendError::Config(format!("{API_KEY_VAR} is not set")))?;
        let base = std::env::var(BASE_URL_VAR).unwrap_or_else(|_| DEFAULT_BASE_URL.into());
        let model = std::env::var(MODEL_VAR).unwrap_or_else(|_| DEFAULT_MODEL.into());
        Ok(Self::new(base, model, key))
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &self.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt}));
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        })
    }
}

/// Counting semaphore bounding in-flight requests.
struct Permits {
    free: Mutex<usize>,
    released: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.released.wait(free).unwrap();
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.released.notify_one();
    }
}

/// Chat-completion client.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let permits = Permits {
            free: Mutex::new(config.max_concurrency.max(1)),
            released: Condvar::new(),
        };
        RemoteBackend {
            config,
            agent,
            permits,
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        RemoteConfig::from_env().map(Self::new)
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
pub fn completion_text(body: &Value) -> Result<String, BackendError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("response has no choices[0].message.content".into()))
}

impl Backend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn complete(&self, req: &Request<'_>) -> Result<String, BackendError> {
        let _permit = self.permits.acquire();
        let mut response = self
            .agent
            .post(&self.config.endpoint())
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(self.config.request_body(req.prompt))
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        completion_text(&body)
    }
}
