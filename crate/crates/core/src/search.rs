//! Depth-limited negamax with optional alpha-beta pruning.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, TurnContext};
use crate::game::{Action, GameKind, GameSpec, GameState, PlayerId, Position};
use crate::games::MancalaBoard;

/// Leaf magnitude for decided games.
pub const TERMINAL_SCALE: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Evaluator {
    Zero,
    Mancala { store_weight: f64, row_weight: f64 },
}

impl Evaluator {
    pub const MANCALA_DEFAULT: Evaluator = Evaluator::Mancala {
        store_weight: 1.0,
        row_weight: 0.25,
    };

    pub fn eval(&self, state: &GameState, player: PlayerId) -> f64 {
        match (self, &state.payload) {
            (
                Evaluator::Mancala {
                    store_weight,
                    row_weight,
                },
                Position::Mancala(b),
            ) => weighted_mancala(b, player, *store_weight, *row_weight),
            _ => 0.0,
        }
    }
}

/// `(own store - opponent store) + 0.25 * (own row - opponent row)`.
pub fn mancala_eval(board: &MancalaBoard, player: PlayerId) -> f64 {
    weighted_mancala(board, player, 1.0, 0.25)
}

fn weighted_mancala(b: &MancalaBoard, p: PlayerId, ws: f64, wr: f64) -> f64 {
    let o = p.opponent();
    ws * (b.store(p) as f64 - b.store(o) as f64)
        + wr * (b.row_seeds(p) as f64 - b.row_seeds(o) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub depth: u32,
    pub evaluator: Evaluator,
    pub use_alpha_beta: bool,
    /// Whether a same-player continuation (Mancala extra turn) consumes a ply.
    pub extra_turn_costs_ply: bool,
}

impl SearchConfig {
    pub fn new(depth: u32, evaluator: Evaluator) -> Self {
        SearchConfig {
            depth,
            evaluator,
            use_alpha_beta: true,
            extra_turn_costs_ply: true,
        }
    }

    /// Mancala evaluation for Mancala, zero elsewhere.
    pub fn for_spec(spec: &GameSpec, depth: u32) -> Self {
        let evaluator = if spec.kind() == GameKind::Mancala {
            Evaluator::MANCALA_DEFAULT
        } else {
            Evaluator::Zero
        };
        SearchConfig::new(depth, evaluator)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchResult {
    pub value: f64,
    /// Lowest-index action attaining `value`; `None` only for terminal roots.
    pub action: Option<Action>,
    pub nodes: u64,
}

pub fn minimax(spec: &GameSpec, state: &GameState, cfg: &SearchConfig) -> SearchResult {
    let mut search = Search {
        spec,
        cfg,
        nodes: 0,
    };
    search.nodes += 1;
    if spec.is_terminal(state) || cfg.depth == 0 {
        let value = search.leaf(state);
        return SearchResult {
            value,
            action: spec.legal_actions(state).first().copied(),
            nodes: search.nodes,
        };
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_action = None;
    let mut alpha = f64::NEG_INFINITY;
    let beta = f64::INFINITY;
    for a in spec.legal_actions(state) {
        let v = search.child_value(state, a, cfg.depth, alpha, beta);
        if v > best {
            best = v;
            best_action = Some(a);
        }
        if cfg.use_alpha_beta && v > alpha {
            alpha = v;
        }
    }
    SearchResult {
        value: best,
        action: best_action,
        nodes: search.nodes,
    }
}

struct Search<'a> {
    spec: &'a GameSpec,
    cfg: &'a SearchConfig,
    nodes: u64,
}

impl Search<'_> {
    fn leaf(&self, state: &GameState) -> f64 {
        if self.spec.is_terminal(state) {
            let o = self.spec.outcome_of(state).expect("terminal");
            o.reward(state.to_move) as f64 * TERMINAL_SCALE
        } else {
            self.cfg.evaluator.eval(state, state.to_move)
        }
    }

    /// Value of `a` for the mover of `state`.
    fn child_value(
        &mut self,
        state: &GameState,
        a: Action,
        depth: u32,
        alpha: f64,
        beta: f64,
    ) -> f64 {
        let child = self.spec.apply(state, a).expect("legal action");
        let same = child.to_move == state.to_move;
        let d = if same && !self.cfg.extra_turn_costs_ply {
            depth
        } else {
            depth - 1
        };
        if same {
            self.negamax(&child, d, alpha, beta)
        } else {
            -self.negamax(&child, d, -beta, -alpha)
        }
    }

    fn negamax(&mut self, state: &GameState, depth: u32, mut alpha: f64, beta: f64) -> f64 {
        self.nodes += 1;
        if depth == 0 || self.spec.is_terminal(state) {
            return self.leaf(state);
        }
        let mut best = f64::NEG_INFINITY;
        for a in self.spec.legal_actions(state) {
            let v = self.child_value(state, a, depth, alpha, beta);
            best = best.max(v);
            if self.cfg.use_alpha_beta {
                alpha = alpha.max(v);
                if alpha >= beta {
                    break;
                }
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn depth(self) -> u32 {
        match self {
            Difficulty::Easy => 2,
            Difficulty::Medium => 4,
            Difficulty::Hard => 6,
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        })
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(format!("unknown difficulty '{s}'")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimaxAgent {
    cfg: SearchConfig,
    name: String,
    last: Option<SearchResult>,
}

impl MinimaxAgent {
    pub fn new(cfg: SearchConfig) -> Self {
        MinimaxAgent {
            name: format!("minimax:{}", cfg.depth),
            cfg,
            last: None,
        }
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }
}

pub fn difficulty_agent(level: Difficulty, spec: &GameSpec) -> MinimaxAgent {
    let mut agent = MinimaxAgent::new(SearchConfig::for_spec(spec, level.depth()));
    agent.name = format!("minimax:{level}");
    agent
}

impl Agent for MinimaxAgent {
    fn descriptor(&self) -> String {
        self.name.clone()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, _: &mut TurnContext<'_>) -> Action {
        let r = minimax(spec, state, &self.cfg);
        self.last = Some(r);
        r.action.unwrap_or(Action::MAX)
    }

    fn reasoning(&self) -> Option<String> {
        self.last.map(|r| {
            format!(
                "Searched {} positions {} plies deep; best line scores {:+.2}.",
                r.nodes, self.cfg.depth, r.value
            )
        })
    }
}
