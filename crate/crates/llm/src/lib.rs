//! Gated LLM functions for game agents.
//!
//! A move query renders a frozen prompt template from the game state, consults a two-tier
//! memo cache, asks a backend on a miss, and accepts the answer only when it parses to a
//! legal move. Otherwise it retries with the legal moves spelled out, then hands the turn
//! to a fallback agent.

pub mod backend;
pub mod cache;
pub mod function;
pub mod parse;
pub mod prompt;

use std::sync::Arc;

use gamebot_core::agent::AgentError;
use gamebot_core::{Agent, AgentDescriptor, GameSpec};

pub use backend::{
    Backend, BackendError, BackendKind, OracleBackend, RemoteBackend, RemoteConfig, ReplayBackend,
    Request, TranscriptEntry,
};
pub use cache::{BagOfWords, CacheOutcome, CacheStats, Embedder, MemoCache};
pub use function::{invoke, InvocationTrace, LlmAgent, LlmFunction};
pub use parse::{parse_move, ParseError};
pub use prompt::{serialize_critique, serialize_state, Template};

/// Builds the backend named by `oracle`, `replay:<path>` or `remote`.
pub fn backend_from_name(name: &str) -> Result<Arc<dyn Backend>, BackendError> {
    match name.split_once(':') {
        None if name == "oracle" => Ok(Arc::new(OracleBackend::new())),
        None if name == "remote" => Ok(Arc::new(RemoteBackend::from_env()?)),
        Some(("replay", path)) => ReplayBackend::from_path(path.as_ref())
            .map(|b| Arc::new(b) as Arc<dyn Backend>)
            .map_err(|e| BackendError::Config(format!("cannot read transcript {path}: {e}"))),
        _ => Err(BackendError::Config(format!("unknown backend {name:?}"))),
    }
}

fn is_backend_name(name: &str) -> bool {
    matches!(name, "oracle" | "remote") || name.starts_with("replay:")
}

/// Backend and cache shared by every `llm:` agent a process builds.
#[derive(Clone)]
pub struct LlmContext {
    backend: Result<Arc<dyn Backend>, String>,
    pub cache: Arc<MemoCache>,
}

impl std::fmt::Debug for LlmContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmContext")
            .field("backend", &self.backend.as_ref().map(|b| b.kind()))
            .field("cache", &self.cache)
            .finish()
    }
}

impl Default for LlmContext {
    fn default() -> Self {
        Self::new(Arc::new(OracleBackend::new()))
    }
}

impl LlmContext {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        LlmContext {
            backend: Ok(backend),
            cache: Arc::new(MemoCache::exact_only()),
        }
    }

    /// A context whose `llm:` agents are refused with `reason`; other agents still build.
    pub fn unavailable(reason: impl Into<String>) -> Self {
        LlmContext {
            backend: Err(reason.into()),
            cache: Arc::new(MemoCache::exact_only()),
        }
    }

    /// Resolves a backend name; a failure is kept and reported when an `llm:` agent is built.
    pub fn from_backend_name(name: &str) -> Self {
        match backend_from_name(name) {
            Ok(b) => Self::new(b),
            Err(e) => Self::unavailable(e.to_string()),
        }
    }

    pub fn with_cache(mut self, cache: Arc<MemoCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn backend(&self) -> Result<&Arc<dyn Backend>, &str> {
        self.backend.as_ref().map_err(String::as_str)
    }

    /// Builds any agent. `llm:<arg>` takes either a backend name, overriding the context's
    /// backend, or the name of the game's LLM function (`nim_move`, `move`, ...).
    pub fn build_agent(
        &self,
        descriptor: &AgentDescriptor,
        spec: &GameSpec,
    ) -> Result<Box<dyn Agent>, AgentError> {
        let AgentDescriptor::Llm(arg) = descriptor else {
            return descriptor.build(spec);
        };
        let unsupported = |reason: String| AgentError::Unsupported {
            agent: descriptor.to_string(),
            game: spec.id(),
            reason,
        };
        let backend = if is_backend_name(arg) {
            backend_from_name(arg).map_err(|e| unsupported(e.to_string()))?
        } else {
            let function = prompt::template_for(spec.kind()).name;
            if arg != function && arg != "move" && arg != spec.kind().name() {
                return Err(AgentError::UnknownAgent(descriptor.to_string()));
            }
            self.backend()
                .map_err(|e| unsupported(e.to_string()))?
                .clone()
        };
        Ok(Box::new(LlmAgent::new(
            descriptor.to_string(),
            LlmFunction::for_spec(spec),
            backend,
            self.cache.clone(),
        )))
    }
}
