//! LLM functions and the gated invocation pipeline.

use std::sync::Arc;

use gamebot_core::search::Difficulty;
use gamebot_core::{Action, Agent, AgentDescriptor, GameKind, GameSpec, GameState, TurnContext};
use serde::Serialize;

use crate::backend::{Backend, BackendKind, Request};
use crate::cache::{CacheOutcome, MemoCache};
use crate::parse::{parse_move, ParseError};
use crate::prompt::{self, Bindings, Template};

pub const DEFAULT_MAX_RETRIES: u32 = 2;

pub type Serializer = fn(&GameState) -> Bindings;
pub type Parser = fn(&GameSpec, &str, &GameState) -> Result<Action, ParseError>;

/// A named prompt template with its serializer, parser and fallback agent.
pub struct LlmFunction {
    pub name: String,
    pub template: Template,
    pub serializer: Serializer,
    pub parser: Parser,
    pub fallback: Box<dyn Agent>,
    pub max_retries: u32,
}

impl std::fmt::Debug for LlmFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmFunction")
            .field("name", &self.name)
            .field("template", &self.template.name)
            .field("fallback", &self.fallback.descriptor())
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl LlmFunction {
    pub fn new(template: Template, fallback: Box<dyn Agent>) -> Self {
        LlmFunction {
            name: template.name.to_string(),
            template,
            serializer: prompt::bindings,
            parser: parse_move,
            fallback,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    /// The move-query function for a game, falling back to the strongest cheap agent.
    pub fn for_spec(spec: &GameSpec) -> Self {
        let fallback = default_fallback(spec)
            .build(spec)
            .unwrap_or_else(|_| Box::new(gamebot_core::RandomAgent));
        Self::new(prompt::template_for(spec.kind()), fallback)
    }

    pub fn render(&self, state: &GameState) -> String {
        self.template.render(&(self.serializer)(state))
    }
}

/// Fallback used by [`LlmFunction::for_spec`].
pub fn default_fallback(spec: &GameSpec) -> AgentDescriptor {
    match spec.kind() {
        GameKind::TicTacToe => AgentDescriptor::Dictionary,
        GameKind::Nim | GameKind::Euclid => AgentDescriptor::Exact,
        GameKind::Mancala => AgentDescriptor::Minimax(Difficulty::Medium),
    }
}

/// Audit record of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvocationTrace {
    pub function: String,
    pub prompt: String,
    pub backend: BackendKind,
    pub cache: CacheOutcome,
    /// Every response text received, in order, including cached ones.
    pub responses: Vec<String>,
    /// Backend transport or data errors, in order.
    pub errors: Vec<String>,
    /// The last parse result: the accepted action, or why the last response was rejected.
    pub parsed: Option<Result<Action, String>>,
    pub retries_used: u32,
    pub fallback_used: bool,
    pub action: Action,
}

impl InvocationTrace {
    pub fn raw_response(&self) -> Option<&str> {
        self.responses.last().map(String::as_str)
    }
}

/// Instruction appended on retries: restates the legal moves.
pub fn retry_instruction(spec: &GameSpec, state: &GameState) -> String {
    format!(
        "\nRespond with exactly one legal move. Legal moves: {}.",
        prompt::describe_actions(&spec.legal_actions(state))
    )
}

/// Renders, consults the cache, queries the backend on a miss, and validates the parsed
/// move. After `1 + max_retries` failed attempts the fallback agent decides. The returned
/// action is legal whenever the state is non-terminal.
pub fn invoke(
    f: &mut LlmFunction,
    spec: &GameSpec,
    state: &GameState,
    backend: &dyn Backend,
    cache: &MemoCache,
    ctx: &mut TurnContext<'_>,
) -> (Action, InvocationTrace) {
    let prompt = f.render(state);
    let mut trace = InvocationTrace {
        function: f.name.clone(),
        prompt: prompt.clone(),
        backend: backend.kind(),
        cache: CacheOutcome::Miss,
        responses: Vec::new(),
        errors: Vec::new(),
        parsed: None,
        retries_used: 0,
        fallback_used: false,
        action: Action::MAX,
    };

    if let Some((outcome, response)) = cache.lookup(&f.name, &prompt) {
        let parsed = (f.parser)(spec, &response, state);
        trace.responses.push(response);
        if let Ok(a) = parsed {
            cache.record_hit(outcome);
            trace.cache = outcome;
            trace.parsed = Some(Ok(a));
            trace.action = a;
            return (a, trace);
        }
    }

    cache.record_backend_call();
    for attempt in 0..=f.max_retries {
        trace.retries_used = attempt;
        let text = if attempt == 0 {
            prompt.clone()
        } else {
            format!("{prompt}{}", retry_instruction(spec, state))
        };
        let request = Request {
            function: &f.name,
            prompt: &text,
            spec,
            state,
        };
        match backend.complete(&request) {
            Ok(response) => {
                let parsed = (f.parser)(spec, &response, state);
                trace.responses.push(response.clone());
                match parsed {
                    Ok(a) if spec.is_legal(state, a) => {
                        cache.insert(&f.name, &prompt, &response);
                        trace.parsed = Some(Ok(a));
                        trace.action = a;
                        return (a, trace);
                    }
                    Ok(a) => trace.parsed = Some(Err(format!("illegal action {a}"))),
                    Err(e) => trace.parsed = Some(Err(e.to_string())),
                }
            }
            Err(e) => trace.errors.push(e.to_string()),
        }
    }

    trace.fallback_used = true;
    let mut a = f.fallback.select(spec, state, ctx);
    if !spec.is_legal(state, a) {
        a = spec
            .legal_actions(state)
            .first()
            .copied()
            .unwrap_or(Action::MAX);
    }
    trace.action = a;
    (a, trace)
}

/// An agent whose moves come from an LLM function.
pub struct LlmAgent {
    name: String,
    function: LlmFunction,
    backend: Arc<dyn Backend>,
    cache: Arc<MemoCache>,
    last: Option<InvocationTrace>,
}

impl LlmAgent {
    pub fn new(
        name: impl Into<String>,
        function: LlmFunction,
        backend: Arc<dyn Backend>,
        cache: Arc<MemoCache>,
    ) -> Self {
        LlmAgent {
            name: name.into(),
            function,
            backend,
            cache,
            last: None,
        }
    }

    pub fn last_trace(&self) -> Option<&InvocationTrace> {
        self.last.as_ref()
    }

    pub fn cache(&self) -> &MemoCache {
        &self.cache
    }
}

impl Agent for LlmAgent {
    fn descriptor(&self) -> String {
        self.name.clone()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action {
        let (a, trace) = invoke(
            &mut self.function,
            spec,
            state,
            self.backend.as_ref(),
            &self.cache,
            ctx,
        );
        self.last = Some(trace);
        a
    }

    fn reasoning(&self) -> Option<String> {
        let t = self.last.as_ref()?;
        if t.fallback_used {
            Some(format!(
                "fallback {} chose {}",
                self.function.fallback.descriptor(),
                t.action
            ))
        } else {
            t.raw_response().map(str::to_string)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BackendError;
    use gamebot_core::rng_from_seed;

    struct Fixed(&'static str);

    impl Backend for Fixed {
        fn kind(&self) -> BackendKind {
            BackendKind::Replay
        }
        fn complete(&self, _: &Request<'_>) -> Result<String, BackendError> {
            Ok(self.0.into())
        }
    }

    #[test]
    fn illegal_answers_fall_back() {
        let spec = GameSpec::nim(8, 3).unwrap();
        let mut f = LlmFunction::for_spec(&spec);
        let cache = MemoCache::exact_only();
        let mut rng = rng_from_seed(0);
        let mut ctx = TurnContext {
            history: &[],
            rng: &mut rng,
        };
        let (a, t) = invoke(
            &mut f,
            &spec,
            &spec.initial(),
            &Fixed("take 7"),
            &cache,
            &mut ctx,
        );
        assert_eq!(a, 3);
        assert!(t.fallback_used);
        assert_eq!(t.retries_used, 2);
        assert_eq!(t.responses.len(), 3);
        assert!(cache.is_empty());
        assert_eq!(cache.stats().backend_calls, 1);
    }

    #[test]
    fn retry_instruction_lists_moves() {
        let spec = GameSpec::nim(8, 3).unwrap();
        assert_eq!(
            retry_instruction(&spec, &spec.initial()),
            "\nRespond with exactly one legal move. Legal moves: 1, 2, 3."
        );
    }
}
