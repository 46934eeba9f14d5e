use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{euclid, mancala, nim, tictactoe};

/// A move in any of the supported games.
///
/// Every game encodes its moves as a small non-negative integer: a cell index for
/// tic-tac-toe, a take-count for Nim, a multiplier for Euclid and a pit index for Mancala.
pub type Action = u32;

/// One of the two seats at the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerId {
    First,
    Second,
}

impl PlayerId {
    pub const BOTH: [PlayerId; 2] = [PlayerId::First, PlayerId::Second];

    pub fn opponent(self) -> PlayerId {
        match self {
            PlayerId::First => PlayerId::Second,
            PlayerId::Second => PlayerId::First,
        }
    }

    pub fn index(self) -> usize {
        match self {
            PlayerId::First => 0,
            PlayerId::Second => 1,
        }
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlayerId::First => f.write_str("first"),
            PlayerId::Second => f.write_str("second"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameResult {
    FirstWins,
    SecondWins,
    Draw,
}

/// Result of a finished game with the per-seat reward in {-1, 0, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub result: GameResult,
    /// Rewards indexed by [`PlayerId::index`].
    pub rewards: [i8; 2],
}

impl Outcome {
    pub fn win_for(player: PlayerId) -> Outcome {
        let mut rewards = [-1, -1];
        rewards[player.index()] = 1;
        let result = match player {
            PlayerId::First => GameResult::FirstWins,
            PlayerId::Second => GameResult::SecondWins,
        };
        Outcome { result, rewards }
    }

    pub fn draw() -> Outcome {
        Outcome {
            result: GameResult::Draw,
            rewards: [0, 0],
        }
    }

    pub fn reward(&self, player: PlayerId) -> i8 {
        self.rewards[player.index()]
    }

    pub fn winner(&self) -> Option<PlayerId> {
        match self.result {
            GameResult::FirstWins => Some(PlayerId::First),
            GameResult::SecondWins => Some(PlayerId::Second),
            GameResult::Draw => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("illegal action {action} in state {key}")]
    IllegalAction { action: Action, key: String },
    #[error("state {0} is not terminal")]
    NotTerminal(String),
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("state belongs to a different game than {0}")]
    WrongGame(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    TicTacToe,
    Nim,
    Euclid,
    Mancala,
}

impl GameKind {
    pub fn name(self) -> &'static str {
        match self {
            GameKind::TicTacToe => "tictactoe",
            GameKind::Nim => "nim",
            GameKind::Euclid => "euclid",
            GameKind::Mancala => "mancala",
        }
    }

    fn key_letter(self) -> char {
        match self {
            GameKind::TicTacToe => 'T',
            GameKind::Nim => 'N',
            GameKind::Euclid => 'E',
            GameKind::Mancala => 'M',
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GameKind {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tictactoe" | "tic-tac-toe" | "ttt" => Ok(GameKind::TicTacToe),
            "nim" | "lollipops" => Ok(GameKind::Nim),
            "euclid" => Ok(GameKind::Euclid),
            "mancala" | "kalah" => Ok(GameKind::Mancala),
            other => Err(GameError::InvalidConfig(format!("unknown game '{other}'"))),
        }
    }
}

/// Game parameters, serialized as `{"game": ..., "params": {...}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "game", content = "params", rename_all = "lowercase")]
pub enum GameConfig {
    TicTacToe {},
    Nim {
        n: u32,
        k: u32,
    },
    Euclid {
        a: u64,
        b: u64,
    },
    Mancala {
        pits_per_side: u32,
        seeds_per_pit: u32,
    },
}

impl GameConfig {
    pub fn kind(&self) -> GameKind {
        match self {
            GameConfig::TicTacToe {} => GameKind::TicTacToe,
            GameConfig::Nim { .. } => GameKind::Nim,
            GameConfig::Euclid { .. } => GameKind::Euclid,
            GameConfig::Mancala { .. } => GameKind::Mancala,
        }
    }

    fn validate(&self) -> Result<(), GameError> {
        match *self {
            GameConfig::TicTacToe {} => Ok(()),
            GameConfig::Nim { n, k } if n >= 1 && k >= 1 => Ok(()),
            GameConfig::Nim { n, k } => Err(GameError::InvalidConfig(format!(
                "nim needs N >= 1 and K >= 1, got N={n} K={k}"
            ))),
            GameConfig::Euclid { a, b } if a >= 1 && b >= 1 => Ok(()),
            GameConfig::Euclid { a, b } => Err(GameError::InvalidConfig(format!(
                "euclid needs two positive piles, got ({a}, {b})"
            ))),
            GameConfig::Mancala {
                pits_per_side,
                seeds_per_pit,
            } if (1..=mancala::MAX_PITS_PER_SIDE).contains(&pits_per_side)
                && seeds_per_pit >= 1 =>
            {
                Ok(())
            }
            GameConfig::Mancala {
                pits_per_side,
                seeds_per_pit,
            } => Err(GameError::InvalidConfig(format!(
                "mancala needs 1..={} pits per side and at least one seed per pit, got {pits_per_side}x{seeds_per_pit}",
                mancala::MAX_PITS_PER_SIDE
            ))),
        }
    }
}

/// Game-specific position data.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "lowercase")]
pub enum Position {
    TicTacToe(tictactoe::Board),
    Nim(nim::Pile),
    Euclid(euclid::Piles),
    Mancala(mancala::Board),
}

impl Position {
    pub fn kind(&self) -> GameKind {
        match self {
            Position::TicTacToe(_) => GameKind::TicTacToe,
            Position::Nim(_) => GameKind::Nim,
            Position::Euclid(_) => GameKind::Euclid,
            Position::Mancala(_) => GameKind::Mancala,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub to_move: PlayerId,
    pub payload: Position,
}

impl GameState {
    pub fn new(to_move: PlayerId, payload: Position) -> Self {
        GameState { to_move, payload }
    }
}

/// A validated game configuration together with its rules.
///
/// All rule queries dispatch on the configured game; states carrying another game's
/// payload are rejected with [`GameError::WrongGame`] (or treated as having no moves).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GameConfig", into = "GameConfig")]
pub struct GameSpec {
    config: GameConfig,
}

impl TryFrom<GameConfig> for GameSpec {
    type Error = GameError;

    fn try_from(config: GameConfig) -> Result<Self, Self::Error> {
        GameSpec::new(config)
    }
}

impl From<GameSpec> for GameConfig {
    fn from(spec: GameSpec) -> Self {
        spec.config
    }
}

impl GameSpec {
    pub fn new(config: GameConfig) -> Result<Self, GameError> {
        config.validate()?;
        Ok(GameSpec { config })
    }

    pub fn tictactoe() -> Self {
        GameSpec {
            config: GameConfig::TicTacToe {},
        }
    }

    pub fn nim(n: u32, k: u32) -> Result<Self, GameError> {
        GameSpec::new(GameConfig::Nim { n, k })
    }

    pub fn euclid(a: u64, b: u64) -> Result<Self, GameError> {
        GameSpec::new(GameConfig::Euclid { a, b })
    }

    pub fn mancala(pits_per_side: u32, seeds_per_pit: u32) -> Result<Self, GameError> {
        GameSpec::new(GameConfig::Mancala {
            pits_per_side,
            seeds_per_pit,
        })
    }

    pub fn config(&self) -> GameConfig {
        self.config
    }

    pub fn kind(&self) -> GameKind {
        self.config.kind()
    }

    /// Stable identifier, e.g. `nim(8,3)` or `tictactoe`.
    pub fn id(&self) -> String {
        match self.config {
            GameConfig::TicTacToe {} => "tictactoe".to_string(),
            GameConfig::Nim { n, k } => format!("nim({n},{k})"),
            GameConfig::Euclid { a, b } => format!("euclid({a},{b})"),
            GameConfig::Mancala {
                pits_per_side,
                seeds_per_pit,
            } => format!("mancala({pits_per_side},{seeds_per_pit})"),
        }
    }

    /// Impartial games (Nim, Euclid) give both players the same moves, so policy tables
    /// may ignore whose turn it is.
    pub fn is_impartial(&self) -> bool {
        matches!(self.kind(), GameKind::Nim | GameKind::Euclid)
    }

    pub fn initial(&self) -> GameState {
        let payload = match self.config {
            GameConfig::TicTacToe {} => Position::TicTacToe(tictactoe::Board::empty()),
            GameConfig::Nim { n, k } => Position::Nim(nim::Pile::new(n, k)),
            GameConfig::Euclid { a, b } => Position::Euclid(euclid::Piles::new(a, b)),
            GameConfig::Mancala {
                pits_per_side,
                seeds_per_pit,
            } => Position::Mancala(mancala::Board::new(pits_per_side, seeds_per_pit)),
        };
        GameState::new(PlayerId::First, payload)
    }

    fn check_kind(&self, state: &GameState) -> Result<(), GameError> {
        if state.payload.kind() == self.kind() {
            Ok(())
        } else {
            Err(GameError::WrongGame(self.id()))
        }
    }

    /// Legal actions in ascending order; empty exactly when the state is terminal.
    pub fn legal_actions(&self, state: &GameState) -> Vec<Action> {
        match &state.payload {
            Position::TicTacToe(b) if self.kind() == GameKind::TicTacToe => b.legal_actions(),
            Position::Nim(p) if self.kind() == GameKind::Nim => p.legal_actions(),
            Position::Euclid(p) if self.kind() == GameKind::Euclid => p.legal_actions(),
            Position::Mancala(b) if self.kind() == GameKind::Mancala => {
                b.legal_actions(state.to_move)
            }
            _ => Vec::new(),
        }
    }

    pub fn is_legal(&self, state: &GameState, action: Action) -> bool {
        match &state.payload {
            Position::TicTacToe(b) => b.is_legal(action),
            Position::Nim(p) => p.is_legal(action),
            Position::Euclid(p) => p.is_legal(action),
            Position::Mancala(b) => b.is_legal(state.to_move, action),
        }
    }

    /// The transition function. The mover changes unless the game grants an extra turn.
    pub fn apply(&self, state: &GameState, action: Action) -> Result<GameState, GameError> {
        self.check_kind(state)?;
        if !self.is_legal(state, action) {
            return Err(GameError::IllegalAction {
                action,
                key: self.canonical_key(state),
            });
        }
        let next = match &state.payload {
            Position::TicTacToe(b) => GameState::new(
                state.to_move.opponent(),
                Position::TicTacToe(b.place(action, state.to_move)),
            ),
            Position::Nim(p) => {
                GameState::new(state.to_move.opponent(), Position::Nim(p.take(action)))
            }
            Position::Euclid(p) => {
                GameState::new(state.to_move.opponent(), Position::Euclid(p.reduce(action)))
            }
            Position::Mancala(b) => {
                let (board, next) = b.sow(state.to_move, action);
                GameState::new(next, Position::Mancala(board))
            }
        };
        Ok(next)
    }

    pub fn is_terminal(&self, state: &GameState) -> bool {
        match &state.payload {
            Position::TicTacToe(b) => b.is_terminal(),
            Position::Nim(p) => p.remaining == 0,
            Position::Euclid(p) => p.is_terminal(),
            Position::Mancala(b) => b.row_is_empty(state.to_move),
        }
    }

    pub fn outcome_of(&self, state: &GameState) -> Result<Outcome, GameError> {
        self.check_kind(state)?;
        if !self.is_terminal(state) {
            return Err(GameError::NotTerminal(self.canonical_key(state)));
        }
        Ok(match &state.payload {
            Position::TicTacToe(b) => match b.winner() {
                Some(p) => Outcome::win_for(p),
                None => Outcome::draw(),
            },
            // Whoever took the last stone left the mover at zero, so the mover wins.
            Position::Nim(_) => Outcome::win_for(state.to_move),
            // The previous mover produced the zero pile.
            Position::Euclid(_) => Outcome::win_for(state.to_move.opponent()),
            Position::Mancala(b) => b.final_outcome(),
        })
    }

    /// Injective, human-readable key: `<game-letter>:<to_move>:<payload>`.
    ///
    /// Tic-tac-toe marks the mover as `X`/`O`; the other games use `1`/`2`.
    pub fn canonical_key(&self, state: &GameState) -> String {
        let mover = self.mover_token(state.to_move);
        self.key_with_mover(state, mover)
    }

    /// Key used by policy tables (dictionaries, Boxes). Identical to
    /// [`canonical_key`](Self::canonical_key) except that impartial games replace the mover
    /// with `*`, since the best move does not depend on the seat.
    pub fn position_key(&self, state: &GameState) -> String {
        if self.is_impartial() {
            self.key_with_mover(state, "*")
        } else {
            self.canonical_key(state)
        }
    }

    fn mover_token(&self, player: PlayerId) -> &'static str {
        match (self.kind(), player) {
            (GameKind::TicTacToe, PlayerId::First) => "X",
            (GameKind::TicTacToe, PlayerId::Second) => "O",
            (_, PlayerId::First) => "1",
            (_, PlayerId::Second) => "2",
        }
    }

    fn key_with_mover(&self, state: &GameState, mover: &str) -> String {
        let payload = match &state.payload {
            Position::TicTacToe(b) => b.key_payload(),
            Position::Nim(p) => p.key_payload(),
            Position::Euclid(p) => p.key_payload(),
            Position::Mancala(b) => b.key_payload(),
        };
        format!(
            "{}:{}:{}",
            state.payload.kind().key_letter(),
            mover,
            payload
        )
    }

    /// Compact 128-bit encoding used by the exhaustive solver, when the position fits.
    pub fn pack(&self, state: &GameState) -> Option<u128> {
        let body = match &state.payload {
            Position::TicTacToe(b) => Some(b.pack()),
            Position::Nim(p) => Some(p.pack()),
            Position::Euclid(p) => p.pack(),
            Position::Mancala(b) => b.pack(),
        }?;
        if body >> 127 != 0 {
            return None;
        }
        Some((body << 1) | state.to_move.index() as u128)
    }

    /// Start positions for curriculum training, ordered from the simplest to `S₀`.
    ///
    /// Nim offers every pile size up to `N`; the other games only start from `S₀`.
    pub fn curriculum_starts(&self) -> Vec<GameState> {
        match self.config {
            GameConfig::Nim { n, k } => (1..=n)
                .map(|r| {
                    let mut pile = nim::Pile::new(n, k);
                    pile.remaining = r;
                    GameState::new(PlayerId::First, Position::Nim(pile))
                })
                .collect(),
            _ => vec![self.initial()],
        }
    }

    /// Parses a human-typed move, accepting the plain integer encoding.
    pub fn parse_action(&self, text: &str) -> Option<Action> {
        text.trim().parse().ok()
    }
}
