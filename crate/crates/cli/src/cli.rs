use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gamebot_core::PlayerId;

#[derive(Parser, Debug)]
#[command(
    name = "gamebot",
    version,
    about = "Play, solve and train agents for small two-player games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Play a game in the terminal against an agent.
    Play(PlayArgs),
    /// Solve a game exhaustively and report its value.
    Solve(SolveArgs),
    /// Train Boxes agents over a list of seeds and report rounds to mastery.
    Train(TrainArgs),
    /// Run the evaluate-and-update refinement loop and write its history.
    Loop(LoopArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// List the curriculum presets.
    Curriculum(CurriculumArgs),
}

/// Game selection shared by every command.
#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// tictactoe, nim, euclid or mancala.
    pub game: String,
    /// Nim: starting pile.
    #[arg(long)]
    pub n: Option<u32>,
    /// Nim: most objects taken per turn.
    #[arg(long)]
    pub k: Option<u32>,
    /// Euclid: first pile.
    #[arg(long)]
    pub a: Option<u64>,
    /// Euclid: second pile.
    #[arg(long)]
    pub b: Option<u64>,
    /// Mancala: pits per side.
    #[arg(long)]
    pub pits: Option<u32>,
    /// Mancala: seeds in each pit at the start.
    #[arg(long)]
    pub stones: Option<u32>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Seat {
    First,
    Second,
}

impl From<Seat> for PlayerId {
    fn from(s: Seat) -> Self {
        match s {
            Seat::First => PlayerId::First,
            Seat::Second => PlayerId::Second,
        }
    }
}

#[derive(Args, Debug)]
pub struct PlayArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Opponent descriptor: dictionary, exact, minimax:Easy|Medium|Hard, boxes:<table>, llm:<fn>, random.
    #[arg(long, default_value = "exact")]
    pub agent: String,
    #[arg(long, value_enum, default_value = "first")]
    pub seat: Seat,
    /// Seeds the agents' randomness and makes the record reproducible.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Display name recorded for the human seat.
    #[arg(long, default_value = "player")]
    pub name: String,
    /// LLM backend for llm: agents: oracle, remote or replay:<path>.
    #[arg(long, default_value = "oracle")]
    pub llm: String,
    /// Append the finished record here instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Write the dictionary table (TSV) here.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Give up beyond this many reachable states.
    #[arg(long, default_value_t = gamebot_core::exact::STATE_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Opponent the learner trains against.
    #[arg(long, default_value = "exact")]
    pub opponent: String,
    /// Train seeds 0..SEEDS.
    #[arg(long, conflicts_with = "seed")]
    pub seeds: Option<u64>,
    /// Train a single seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 500)]
    pub max_rounds: usize,
    /// Vary one game parameter, e.g. n=5,9,13,17,21.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Consecutive winning-start wins that count as mastery.
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    #[arg(long, default_value_t = 1.0)]
    pub initial_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub win_delta: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub loss_delta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub floor: f64,
    /// Write the table of the last run (TSV) here, for use as boxes:<path>.
    #[arg(long)]
    pub table_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum UpdateKind {
    Identity,
    Boxes,
    Scripted,
}

#[derive(Args, Debug)]
pub struct LoopArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Starting heuristic as an agent descriptor. The boxes update starts from an empty table.
    #[arg(long)]
    pub h0: Option<String>,
    #[arg(long, value_enum, default_value = "boxes")]
    pub update: UpdateKind,
    /// Comma-separated descriptors applied in order by the scripted update.
    #[arg(long, value_delimiter = ',')]
    pub script: Vec<String>,
    /// Opponent used both for evaluation and for Boxes training.
    #[arg(long, default_value = "exact")]
    pub opponent: String,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 200)]
    pub max_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "oracle")]
    pub llm: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory holding record segments and the leaderboard snapshot.
    #[arg(long, default_value = "gamebot-data")]
    pub store: PathBuf,
    /// LLM backend for llm: agents: oracle, remote, replay:<path> or none.
    #[arg(long, default_value = "oracle")]
    pub llm: String,
    /// Seconds between background flushes.
    #[arg(long, default_value_t = 5.0)]
    pub flush_interval: f64,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tier {
    Foundational,
    Intermediate,
    Advanced,
}

#[derive(Args, Debug)]
pub struct CurriculumArgs {
    #[arg(long, value_enum)]
    pub tier: Option<Tier>,
}
