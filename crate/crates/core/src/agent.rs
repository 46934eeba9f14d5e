//! The agent contract, descriptor strings and the match runner.

use std::fmt;
use std::str::FromStr;

use chrono::DateTime;
use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::{Action, GameKind, GameSpec, GameState, Outcome, PlayerId};
use crate::record::{GameRecord, MoveEntry, Seats};
use crate::search::Difficulty;
use crate::{rng_from_seed, GameRng};

/// Everything an agent may consult besides the state itself.
pub struct TurnContext<'a> {
    pub history: &'a [MoveEntry],
    pub rng: &'a mut GameRng,
}

impl TurnContext<'_> {
    /// The most recent move made by `player`, if any.
    pub fn last_move_by(&self, player: PlayerId) -> Option<Action> {
        self.history
            .iter()
            .rev()
            .find(|m| m.player == player)
            .map(|m| m.action)
    }
}

pub trait Agent: Send {
    /// Descriptor string recorded in match transcripts.
    fn descriptor(&self) -> String;

    /// Chooses a move in a non-terminal state. Returning an illegal action forfeits the match.
    fn select(&mut self, spec: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action;

    /// Optional explanation of the last selected move.
    fn reasoning(&self) -> Option<String> {
        None
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action {
        (**self).select(spec, state, ctx)
    }

    fn reasoning(&self) -> Option<String> {
        (**self).reasoning()
    }
}

/// Uniformly random legal moves.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn descriptor(&self) -> String {
        "random".into()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action {
        *spec
            .legal_actions(state)
            .choose(ctx.rng)
            .expect("select is only called on non-terminal states")
    }
}

/// Parsed form of the agent descriptor strings used by the CLI and the service.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AgentDescriptor {
    Dictionary,
    Exact,
    Minimax(Difficulty),
    MinimaxDepth(u32),
    Boxes(String),
    Llm(String),
    Random,
    Heuristic(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("unknown agent descriptor '{0}'")]
    UnknownAgent(String),
    #[error("agent '{agent}' is not available for {game}: {reason}")]
    Unsupported {
        agent: String,
        game: String,
        reason: String,
    },
}

impl FromStr for AgentDescriptor {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || AgentError::UnknownAgent(s.to_string());
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("dictionary", None) => Ok(AgentDescriptor::Dictionary),
            ("exact", None) => Ok(AgentDescriptor::Exact),
            ("random", None) => Ok(AgentDescriptor::Random),
            ("minimax", Some(a)) => {
                let a = a
                    .trim_start_matches("--depth")
                    .trim_start_matches('=')
                    .trim();
                if let Ok(d) = a.parse::<u32>() {
                    Ok(AgentDescriptor::MinimaxDepth(d))
                } else {
                    a.parse()
                        .map(AgentDescriptor::Minimax)
                        .map_err(|_| unknown())
                }
            }
            ("boxes", Some(a)) if !a.is_empty() => Ok(AgentDescriptor::Boxes(a.to_string())),
            ("llm", Some(a)) if !a.is_empty() => Ok(AgentDescriptor::Llm(a.to_string())),
            ("heuristic", Some(a)) if !a.is_empty() => {
                Ok(AgentDescriptor::Heuristic(a.to_ascii_lowercase()))
            }
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for AgentDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentDescriptor::Dictionary => f.write_str("dictionary"),
            AgentDescriptor::Exact => f.write_str("exact"),
            AgentDescriptor::Minimax(d) => write!(f, "minimax:{d}"),
            AgentDescriptor::MinimaxDepth(d) => write!(f, "minimax:{d}"),
            AgentDescriptor::Boxes(t) => write!(f, "boxes:{t}"),
            AgentDescriptor::Llm(n) => write!(f, "llm:{n}"),
            AgentDescriptor::Random => f.write_str("random"),
            AgentDescriptor::Heuristic(h) => write!(f, "heuristic:{h}"),
        }
    }
}

impl AgentDescriptor {
    /// Builds the agents that need nothing beyond this crate. Boxes tables are loaded from
    /// the given path; LLM agents are built by the LLM layer.
    pub fn build(&self, spec: &GameSpec) -> Result<Box<dyn Agent>, AgentError> {
        let unsupported = |reason: String| AgentError::Unsupported {
            agent: self.to_string(),
            game: spec.id(),
            reason,
        };
        Ok(match self {
            AgentDescriptor::Random => Box::new(RandomAgent),
            AgentDescriptor::Minimax(level) => {
                Box::new(crate::search::difficulty_agent(*level, spec))
            }
            AgentDescriptor::MinimaxDepth(depth) => Box::new(crate::search::MinimaxAgent::new(
                crate::search::SearchConfig::for_spec(spec, *depth),
            )),
            AgentDescriptor::Dictionary => {
                let table =
                    crate::exact::build_dictionary(spec).map_err(|e| unsupported(e.to_string()))?;
                Box::new(crate::exact::DictionaryAgent::new(std::sync::Arc::new(
                    table,
                )))
            }
            AgentDescriptor::Exact => match spec.kind() {
                GameKind::Nim | GameKind::Euclid => Box::new(crate::exact::ExactAgent),
                _ => {
                    let table = crate::exact::build_dictionary(spec)
                        .map_err(|e| unsupported(e.to_string()))?;
                    Box::new(crate::exact::DictionaryAgent::with_descriptor(
                        std::sync::Arc::new(table),
                        "exact",
                    ))
                }
            },
            AgentDescriptor::Heuristic(name) if name == "h0" => {
                if spec.kind() != GameKind::Nim {
                    return Err(unsupported("h0 is a Nim heuristic".into()));
                }
                Box::new(crate::exact::H0Agent)
            }
            AgentDescriptor::Heuristic(name) => {
                return Err(AgentError::UnknownAgent(format!("heuristic:{name}")))
            }
            AgentDescriptor::Boxes(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| unsupported(format!("cannot read table {path}: {e}")))?;
                let table = crate::boxes::BoxTable::from_tsv(&text, Default::default())
                    .map_err(|e| unsupported(e.to_string()))?;
                Box::new(crate::boxes::BoxesAgent::greedy(table, self.to_string()))
            }
            AgentDescriptor::Llm(_) => {
                return Err(unsupported("LLM agents are built by the LLM layer".into()))
            }
        })
    }
}

/// Plays one match from the initial state.
pub fn play_match(
    spec: &GameSpec,
    first: &mut dyn Agent,
    second: &mut dyn Agent,
    seed: u64,
) -> GameRecord {
    play_match_from(spec, &spec.initial(), first, second, seed)
}

/// Plays one match from `start`. An agent that returns an illegal action forfeits and the
/// faulting move is not recorded. `created_at` is left at the UNIX epoch so identical seeds
/// give identical records; callers that persist records stamp the time themselves.
pub fn play_match_from(
    spec: &GameSpec,
    start: &GameState,
    first: &mut dyn Agent,
    second: &mut dyn Agent,
    seed: u64,
) -> GameRecord {
    let mut rng = rng_from_seed(seed);
    let mut state = start.clone();
    let mut moves: Vec<MoveEntry> = Vec::new();
    let mut forfeit = None;
    while !spec.is_terminal(&state) {
        let mover = state.to_move;
        let agent: &mut dyn Agent = match mover {
            PlayerId::First => &mut *first,
            PlayerId::Second => &mut *second,
        };
        let action = {
            let mut ctx = TurnContext {
                history: &moves,
                rng: &mut rng,
            };
            agent.select(spec, &state, &mut ctx)
        };
        match spec.apply(&state, action) {
            Ok(next) => {
                moves.push(MoveEntry {
                    player: mover,
                    action,
                    key: spec.canonical_key(&state),
                });
                state = next;
            }
            Err(_) => {
                forfeit = Some(mover);
                break;
            }
        }
    }
    let outcome = match forfeit {
        Some(p) => Outcome::win_for(p.opponent()),
        None => spec
            .outcome_of(&state)
            .expect("loop exits on terminal states"),
    };
    let agents = Seats::new(first.descriptor(), second.descriptor());
    let record_id = record_digest(spec, start, &agents, seed, &moves);
    GameRecord {
        record_id,
        spec_id: spec.id(),
        config: spec.config(),
        moves,
        outcome,
        agents,
        created_at: DateTime::UNIX_EPOCH,
        forfeit,
        start: (start != &spec.initial()).then(|| start.clone()),
    }
}

fn record_digest(
    spec: &GameSpec,
    start: &GameState,
    agents: &Seats,
    seed: u64,
    moves: &[MoveEntry],
) -> String {
    let mut h = Sha256::new();
    h.update(spec.id());
    h.update(b"\n");
    h.update(spec.canonical_key(start));
    h.update(b"\n");
    h.update(&agents.first);
    h.update(b"\n");
    h.update(&agents.second);
    h.update(seed.to_le_bytes());
    for m in moves {
        h.update(m.action.to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}
