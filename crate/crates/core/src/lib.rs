//! Core engine for strategic game agents.
//!
//! The crate is organised around the machine categories it implements:
//!
//! * [`game`] and [`games`]: the alternating-turn game contract and the four concrete games
//!   (tic-tac-toe, misère Nim, the Game of Euclid and Kalah-style Mancala).
//! * [`exact`]: dictionary tables built by exhaustive analysis, closed-form solvers and the
//!   brute-force oracle every test suite leans on.
//! * [`search`]: depth-limited negamax with alpha-beta pruning and difficulty tiers.
//! * [`boxes`]: the Boxes trial-and-error learner.
//! * [`training`]: the evaluate / loss / update heuristic refinement loop.

pub mod agent;
pub mod boxes;
pub mod exact;
pub mod game;
pub mod games;
pub mod record;
pub mod search;
pub mod training;

pub use agent::{play_match, play_match_from, Agent, AgentDescriptor, RandomAgent, TurnContext};
pub use game::{
    Action, GameConfig, GameError, GameKind, GameResult, GameSpec, GameState, Outcome, PlayerId,
    Position,
};
pub use record::{GameRecord, MoveEntry, ReplayError, Seats};

/// Deterministic RNG used everywhere a seed is accepted.
pub type GameRng = rand_chacha::ChaCha8Rng;

/// Builds the crate-wide RNG from a seed.
pub fn rng_from_seed(seed: u64) -> GameRng {
    use rand::SeedableRng;
    GameRng::seed_from_u64(seed)
}
