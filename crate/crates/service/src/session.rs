//! Live human-versus-agent game sessions held in memory.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::Utc;
use gamebot_core::{
    rng_from_seed, Action, Agent, GameConfig, GameRecord, GameRng, GameSpec, GameState, MoveEntry,
    Outcome, PlayerId, Position, Seats, TurnContext,
};
use serde::{Deserialize, Serialize};

use crate::elo::HUMAN_PREFIX;

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(3600);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Finished,
    Abandoned,
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("it is not the human's turn")]
    NotYourTurn,
    #[error("action {action} is not legal here; legal actions: {legal:?}")]
    IllegalMove { action: Action, legal: Vec<Action> },
    #[error("session is {0:?}")]
    Closed(SessionStatus),
}

/// What the client sees of a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub session_id: String,
    pub game: String,
    pub config: GameConfig,
    pub state: Position,
    pub key: String,
    pub legal_actions: Vec<Action>,
    pub to_move: PlayerId,
    pub human_seat: PlayerId,
    pub status: SessionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

/// Result of one human move.
#[derive(Clone, Debug, PartialEq)]
pub struct MoveReport {
    pub agent_moves: Vec<Action>,
    pub reasoning: Option<String>,
    pub record: Option<GameRecord>,
}

pub struct Session {
    pub id: String,
    pub spec: GameSpec,
    pub state: GameState,
    pub human_seat: PlayerId,
    pub participant: String,
    pub agent_name: String,
    agent: Option<Box<dyn Agent>>,
    pub moves: Vec<MoveEntry>,
    pub status: SessionStatus,
    pub last_active: Instant,
    rng: GameRng,
    forfeit: Option<PlayerId>,
    pub record: Option<GameRecord>,
}

impl Session {
    /// Creates the session and lets the agent open when it holds the first seat.
    pub fn start(
        id: String,
        spec: GameSpec,
        agent: Box<dyn Agent>,
        human_seat: PlayerId,
        participant: &str,
        seed: u64,
    ) -> (Session, MoveReport) {
        let mut s = Session {
            id,
            spec,
            state: spec.initial(),
            human_seat,
            participant: participant.to_string(),
            agent_name: agent.descriptor(),
            agent: Some(agent),
            moves: Vec::new(),
            status: SessionStatus::Active,
            last_active: Instant::now(),
            rng: rng_from_seed(seed),
            forfeit: None,
            record: None,
        };
        let report = s.agent_turns();
        (s, report)
    }

    pub fn view(&self) -> View {
        View {
            session_id: self.id.clone(),
            game: self.spec.id(),
            config: self.spec.config(),
            state: self.state.payload.clone(),
            key: self.spec.canonical_key(&self.state),
            legal_actions: if self.status == SessionStatus::Active {
                self.spec.legal_actions(&self.state)
            } else {
                Vec::new()
            },
            to_move: self.state.to_move,
            human_seat: self.human_seat,
            status: self.status,
            outcome: self.outcome(),
        }
    }

    pub fn outcome(&self) -> Option<Outcome> {
        match self.forfeit {
            Some(p) => Some(Outcome::win_for(p.opponent())),
            None => self.spec.outcome_of(&self.state).ok(),
        }
    }

    /// Applies the human's action, then lets the agent move until the human is to move
    /// again or the game ends. An illegal action leaves the session unchanged.
    pub fn submit(&mut self, action: Action) -> Result<MoveReport, SessionError> {
        if self.status != SessionStatus::Active {
            return Err(SessionError::Closed(self.status));
        }
        if self.state.to_move != self.human_seat {
            return Err(SessionError::NotYourTurn);
        }
        let next = self
            .spec
            .apply(&self.state, action)
            .map_err(|_| SessionError::IllegalMove {
                action,
                legal: self.spec.legal_actions(&self.state),
            })?;
        self.moves.push(MoveEntry {
            player: self.human_seat,
            action,
            key: self.spec.canonical_key(&self.state),
        });
        self.state = next;
        self.last_active = Instant::now();
        Ok(self.agent_turns())
    }

    fn agent_turns(&mut self) -> MoveReport {
        let mut report = MoveReport {
            agent_moves: Vec::new(),
            reasoning: None,
            record: None,
        };
        while !self.spec.is_terminal(&self.state) && self.state.to_move != self.human_seat {
            let agent = self
                .agent
                .as_mut()
                .expect("active sessions hold their agent");
            let action = {
                let mut ctx = TurnContext {
                    history: &self.moves,
                    rng: &mut self.rng,
                };
                agent.select(&self.spec, &self.state, &mut ctx)
            };
            match self.spec.apply(&self.state, action) {
                Ok(next) => {
                    self.moves.push(MoveEntry {
                        player: self.state.to_move,
                        action,
                        key: self.spec.canonical_key(&self.state),
                    });
                    self.state = next;
                    report.agent_moves.push(action);
                    if let Some(r) = agent.reasoning() {
                        report.reasoning = Some(r);
                    }
                }
                Err(_) => {
                    self.forfeit = Some(self.state.to_move);
                    break;
                }
            }
        }
        if self.forfeit.is_some() || self.spec.is_terminal(&self.state) {
            self.finish();
            report.record = self.record.clone();
        }
        report
    }

    fn finish(&mut self) {
        self.status = SessionStatus::Finished;
        self.agent = None;
        let human = format!("{HUMAN_PREFIX}{}", self.participant);
        let agents = match self.human_seat {
            PlayerId::First => Seats::new(human, self.agent_name.clone()),
            PlayerId::Second => Seats::new(self.agent_name.clone(), human),
        };
        self.record = Some(GameRecord {
            record_id: self.id.clone(),
            spec_id: self.spec.id(),
            config: self.spec.config(),
            moves: self.moves.clone(),
            outcome: self.outcome().expect("finished sessions have an outcome"),
            agents,
            created_at: Utc::now(),
            forfeit: self.forfeit,
            start: None,
        });
    }

    pub fn abandon(&mut self) {
        if self.status == SessionStatus::Active {
            self.status = SessionStatus::Abandoned;
            self.agent = None;
        }
    }
}

/// Sessions by id. Each session has its own lock, so moves on one session are serialized
/// while different sessions proceed independently.
#[derive(Default)]
pub struct SessionManager {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionManager {
    pub fn insert(&self, session: Session) -> Arc<Mutex<Session>> {
        let id = session.id.clone();
        let handle = Arc::new(Mutex::new(session));
        self.sessions.lock().unwrap().insert(id, handle.clone());
        handle
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Marks active sessions idle for longer than `ttl` as abandoned and forgets closed
    /// sessions idle for longer than `ttl`. Returns how many were abandoned.
    pub fn expire(&self, ttl: Duration, now: Instant) -> usize {
        let mut abandoned = 0;
        self.sessions.lock().unwrap().retain(|_, handle| {
            let Ok(mut s) = handle.try_lock() else {
                return true;
            };
            let idle = now.saturating_duration_since(s.last_active) > ttl;
            match (s.status, idle) {
                (SessionStatus::Active, true) => {
                    s.abandon();
                    s.last_active = now;
                    abandoned += 1;
                    true
                }
                (_, true) => false,
                _ => true,
            }
        });
        abandoned
    }
}
