//! Match transcripts and replay validation.

use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, GameConfig, GameError, GameSpec, GameState, Outcome, PlayerId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveEntry {
    pub player: PlayerId,
    pub action: Action,
    /// Canonical key of the state in which the action was taken.
    pub key: String,
}

/// Agent descriptor per seat.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seats {
    pub first: String,
    pub second: String,
}

impl Seats {
    pub fn new(first: impl Into<String>, second: impl Into<String>) -> Self {
        Seats {
            first: first.into(),
            second: second.into(),
        }
    }

    pub fn get(&self, player: PlayerId) -> &str {
        match player {
            PlayerId::First => &self.first,
            PlayerId::Second => &self.second,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub record_id: String,
    pub spec_id: String,
    pub config: GameConfig,
    pub moves: Vec<MoveEntry>,
    pub outcome: Outcome,
    pub agents: Seats,
    pub created_at: DateTime<Utc>,
    /// Seat that forfeited by returning an illegal action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forfeit: Option<PlayerId>,
    /// Start position when the match did not begin at the initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<GameState>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error(transparent)]
    Config(#[from] GameError),
    #[error("move {index}: expected state {expected}, record says {found}")]
    KeyMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("move {index}: recorded player {found} but {expected} was to move")]
    WrongPlayer {
        index: usize,
        expected: PlayerId,
        found: PlayerId,
    },
    #[error("move {index}: illegal action {action}")]
    IllegalMove { index: usize, action: Action },
    #[error("replay ended in a non-terminal state without a forfeit")]
    Unfinished,
    #[error("replayed outcome {replayed:?} differs from recorded {recorded:?}")]
    OutcomeMismatch {
        replayed: Outcome,
        recorded: Outcome,
    },
    #[error("record spec id {found} does not match config {expected}")]
    SpecMismatch { expected: String, found: String },
}

impl GameRecord {
    pub fn spec(&self) -> Result<GameSpec, GameError> {
        GameSpec::new(self.config)
    }

    pub fn start_state(&self, spec: &GameSpec) -> GameState {
        self.start.clone().unwrap_or_else(|| spec.initial())
    }

    /// Folds the moves from the start state and checks every key and the final outcome.
    /// Returns the replayed final state.
    pub fn replay(&self) -> Result<GameState, ReplayError> {
        let spec = self.spec()?;
        if spec.id() != self.spec_id {
            return Err(ReplayError::SpecMismatch {
                expected: spec.id(),
                found: self.spec_id.clone(),
            });
        }
        let mut state = self.start_state(&spec);
        for (index, m) in self.moves.iter().enumerate() {
            let expected = spec.canonical_key(&state);
            if expected != m.key {
                return Err(ReplayError::KeyMismatch {
                    index,
                    expected,
                    found: m.key.clone(),
                });
            }
            if m.player != state.to_move {
                return Err(ReplayError::WrongPlayer {
                    index,
                    expected: state.to_move,
                    found: m.player,
                });
            }
            state = spec
                .apply(&state, m.action)
                .map_err(|_| ReplayError::IllegalMove {
                    index,
                    action: m.action,
                })?;
        }
        let replayed = match self.forfeit {
            Some(p) => Outcome::win_for(p.opponent()),
            None if spec.is_terminal(&state) => spec.outcome_of(&state)?,
            None => return Err(ReplayError::Unfinished),
        };
        if replayed != self.outcome {
            return Err(ReplayError::OutcomeMismatch {
                replayed,
                recorded: self.outcome,
            });
        }
        Ok(state)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

/// Writes records as newline-delimited JSON.
pub fn write_ndjson<W: Write>(mut out: W, records: &[GameRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

/// Reads newline-delimited JSON records, skipping blank lines.
pub fn read_ndjson<R: BufRead>(input: R) -> std::io::Result<Vec<GameRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        records.push(rec);
    }
    Ok(records)
}
