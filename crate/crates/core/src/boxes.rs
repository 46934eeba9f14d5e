//! Michie's Boxes learner: one box of action weights per position, reinforced by outcome.
//!
//! Training runs against a fixed opponent with an ascending-start curriculum. The curriculum
//! starts are [`GameSpec::curriculum_starts`]; a frontier pointer marks the hardest start in
//! play. Each round begins at the frontier, with the learner alternating seats. The frontier
//! moves up after a won game from a winning start when every box's argmax is oracle-optimal.
//! Mastery means the frontier sits at the last start (`S₀`), every box's argmax is optimal,
//! and the last `W` games from winning starts were all won.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, TurnContext};
use crate::exact::Solver;
use crate::game::{Action, GameKind, GameSpec, GameState, Outcome, PlayerId};
use crate::record::{GameRecord, MoveEntry};
use crate::{rng_from_seed, GameRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxParams {
    pub initial_weight: f64,
    pub win_delta: f64,
    pub loss_delta: f64,
    pub floor: f64,
    pub mastery_window: usize,
}

impl Default for BoxParams {
    fn default() -> Self {
        BoxParams {
            initial_weight: 1.0,
            win_delta: 1.0,
            loss_delta: -0.5,
            floor: 0.05,
            mastery_window: 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoxesError {
    #[error("record {record_id} is for {found}, expected {expected}")]
    ConfigMismatch {
        record_id: String,
        expected: String,
        found: String,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// `(key, action)` pairs for the learner's turns in one game.
pub type Trajectory = Vec<(String, Action)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxTable {
    pub params: BoxParams,
    pub boxes: BTreeMap<String, Vec<(Action, f64)>>,
}

impl BoxTable {
    pub fn new(params: BoxParams) -> Self {
        BoxTable {
            params,
            boxes: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[(Action, f64)]> {
        self.boxes.get(key).map(Vec::as_slice)
    }

    /// The box for `state`, opened at uniform weight on first visit.
    pub fn ensure(
        &mut self,
        spec: &GameSpec,
        state: &GameState,
    ) -> (String, &mut Vec<(Action, f64)>) {
        let key = spec.position_key(state);
        let w = self.params.initial_weight;
        let entry = self.boxes.entry(key.clone()).or_insert_with(|| {
            spec.legal_actions(state)
                .into_iter()
                .map(|a| (a, w))
                .collect()
        });
        (key, entry)
    }

    /// Samples an action with probability proportional to its weight.
    pub fn select_action(
        &mut self,
        spec: &GameSpec,
        state: &GameState,
        rng: &mut GameRng,
    ) -> Action {
        let (_, weights) = self.ensure(spec, state);
        sample(weights, rng)
    }

    /// Selection probabilities for a box, in action order.
    pub fn probabilities(&self, key: &str) -> Option<Vec<(Action, f64)>> {
        self.boxes.get(key).map(|ws| {
            let total: f64 = ws.iter().map(|&(_, w)| w).sum();
            ws.iter().map(|&(a, w)| (a, w / total)).collect()
        })
    }

    /// Highest-weight action, lowest index on ties.
    pub fn argmax(&self, key: &str) -> Option<Action> {
        argmax(self.boxes.get(key)?)
    }

    /// Adds `win_delta` to every visited weight after a win, `loss_delta` (floored) after a
    /// loss; draws leave the table unchanged.
    pub fn reinforce(
        &mut self,
        trajectory: &[(String, Action)],
        outcome: &Outcome,
        learner: PlayerId,
    ) {
        let delta = match outcome.reward(learner) {
            1 => self.params.win_delta,
            -1 => self.params.loss_delta,
            _ => return,
        };
        let floor = self.params.floor;
        for (key, action) in trajectory {
            if let Some(ws) = self.boxes.get_mut(key) {
                if let Some(slot) = ws.iter_mut().find(|(a, _)| a == action) {
                    slot.1 = (slot.1 + delta).max(floor);
                }
            }
        }
    }

    /// `key<TAB>action:weight,action:weight,...` lines sorted by key.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, ws) in &self.boxes {
            let cells: Vec<String> = ws.iter().map(|(a, w)| format!("{a}:{w}")).collect();
            let _ = writeln!(out, "{k}\t{}", cells.join(","));
        }
        out
    }

    pub fn from_tsv(text: &str, params: BoxParams) -> Result<Self, BoxesError> {
        let mut table = BoxTable::new(params);
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let err = |reason: &str| BoxesError::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (key, cells) = line.split_once('\t').ok_or_else(|| err("missing tab"))?;
            let mut ws = Vec::new();
            for cell in cells.split(',') {
                let (a, w) = cell
                    .split_once(':')
                    .ok_or_else(|| err("expected action:weight"))?;
                let a = a.parse().map_err(|_| err("bad action"))?;
                let w = w.parse().map_err(|_| err("bad weight"))?;
                ws.push((a, w));
            }
            table.boxes.insert(key.to_string(), ws);
        }
        Ok(table)
    }
}

fn sample(weights: &[(Action, f64)], rng: &mut GameRng) -> Action {
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for &(a, w) in weights {
        x -= w;
        if x < 0.0 {
            return a;
        }
    }
    weights.last().expect("boxes are never empty").0
}

fn argmax(weights: &[(Action, f64)]) -> Option<Action> {
    let mut best: Option<(Action, f64)> = None;
    for &(a, w) in weights {
        if best.map_or(true, |(_, bw)| w > bw) {
            best = Some((a, w));
        }
    }
    best.map(|(a, _)| a)
}

/// Plays from a box table, either sampling (as during training) or greedily.
#[derive(Clone, Debug)]
pub struct BoxesAgent {
    pub table: BoxTable,
    greedy: bool,
    name: String,
}

impl BoxesAgent {
    pub fn sampling(table: BoxTable, name: impl Into<String>) -> Self {
        BoxesAgent {
            table,
            greedy: false,
            name: name.into(),
        }
    }

    pub fn greedy(table: BoxTable, name: impl Into<String>) -> Self {
        BoxesAgent {
            table,
            greedy: true,
            name: name.into(),
        }
    }
}

impl Agent for BoxesAgent {
    fn descriptor(&self) -> String {
        self.name.clone()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action {
        if self.greedy {
            let key = spec.position_key(state);
            self.table
                .argmax(&key)
                .filter(|&a| spec.is_legal(state, a))
                .or_else(|| spec.legal_actions(state).first().copied())
                .unwrap_or(Action::MAX)
        } else {
            self.table.select_action(spec, state, ctx.rng)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub start_key: String,
    pub learner: PlayerId,
    pub won: bool,
    pub draw: bool,
    pub winning_start: bool,
    pub states_visited: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    /// Completed games, `L`.
    pub rounds_played: usize,
    pub mastered: bool,
    pub seed: u64,
    pub history: Vec<RoundRecord>,
    pub table: BoxTable,
}

/// Incremental Boxes training against a fixed opponent.
pub struct BoxTrainer {
    spec: GameSpec,
    params: BoxParams,
    table: BoxTable,
    opponent: Box<dyn Agent>,
    rng: GameRng,
    seed: u64,
    oracle: Option<Solver>,
    starts: Vec<GameState>,
    frontier: usize,
    recent: VecDeque<bool>,
    history: Vec<RoundRecord>,
    mastered: bool,
}

impl BoxTrainer {
    pub fn new(spec: GameSpec, opponent: Box<dyn Agent>, params: BoxParams, seed: u64) -> Self {
        Self::with_table(spec, opponent, BoxTable::new(params), seed)
    }

    pub fn with_table(
        spec: GameSpec,
        opponent: Box<dyn Agent>,
        table: BoxTable,
        seed: u64,
    ) -> Self {
        let oracle = (spec.kind() != GameKind::Mancala).then(|| Solver::new(spec));
        let starts = spec.curriculum_starts();
        let frontier = starts
            .iter()
            .position(|s| spec.legal_actions(s).len() > 1)
            .unwrap_or(starts.len() - 1);
        let mut trainer = BoxTrainer {
            spec,
            params: table.params,
            table,
            opponent,
            rng: rng_from_seed(seed),
            seed,
            oracle,
            starts,
            frontier,
            recent: VecDeque::new(),
            history: Vec::new(),
            mastered: false,
        };
        // A table that already plays a start correctly does not need to revisit it.
        while trainer.frontier + 1 < trainer.starts.len()
            && trainer.start_is_known(trainer.frontier)
        {
            trainer.frontier += 1;
        }
        trainer
    }

    fn start_is_known(&mut self, idx: usize) -> bool {
        let key = self.spec.position_key(&self.starts[idx]);
        self.table.get(&key).is_some() && self.policy_is_optimal()
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn table(&self) -> &BoxTable {
        &self.table
    }

    pub fn rounds_played(&self) -> usize {
        self.history.len()
    }

    pub fn is_mastered(&self) -> bool {
        self.mastered
    }

    pub fn frontier_start(&self) -> &GameState {
        &self.starts[self.frontier]
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    /// Whether every box's argmax attains the oracle value. Always false without an oracle.
    pub fn policy_is_optimal(&mut self) -> bool {
        let Some(oracle) = self.oracle.as_mut() else {
            return false;
        };
        policy_matches_oracle(&self.spec, &self.table, oracle)
    }

    /// Plays and learns from one game.
    pub fn step(&mut self) -> &RoundRecord {
        let round = self.history.len() + 1;
        let learner = if round % 2 == 1 {
            PlayerId::First
        } else {
            PlayerId::Second
        };
        let start = self.starts[self.frontier].clone();
        let winning_start = self.oracle.as_mut().is_some_and(|o| {
            let v = o.value(&start);
            if start.to_move == learner {
                v > 0
            } else {
                v < 0
            }
        });

        let mut state = start.clone();
        let mut moves: Vec<MoveEntry> = Vec::new();
        let mut trajectory: Trajectory = Vec::new();
        let mut forfeit = None;
        while !self.spec.is_terminal(&state) {
            let mover = state.to_move;
            let action = if mover == learner {
                let a = self.table.select_action(&self.spec, &state, &mut self.rng);
                trajectory.push((self.spec.position_key(&state), a));
                a
            } else {
                let mut ctx = TurnContext {
                    history: &moves,
                    rng: &mut self.rng,
                };
                self.opponent.select(&self.spec, &state, &mut ctx)
            };
            match self.spec.apply(&state, action) {
                Ok(next) => {
                    moves.push(MoveEntry {
                        player: mover,
                        action,
                        key: self.spec.canonical_key(&state),
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
            None => self.spec.outcome_of(&state).expect("terminal"),
        };
        self.table.reinforce(&trajectory, &outcome, learner);

        let won = outcome.reward(learner) > 0;
        let optimal = self.policy_is_optimal();
        let last = self.starts.len() - 1;
        if winning_start {
            self.recent.push_back(won);
            while self.recent.len() > self.params.mastery_window {
                self.recent.pop_front();
            }
            if won && optimal && self.frontier < last {
                self.frontier += 1;
            }
        }
        self.mastered = self.frontier == last
            && optimal
            && self.recent.len() >= self.params.mastery_window
            && self.recent.iter().all(|&w| w);

        self.history.push(RoundRecord {
            round,
            start_key: self.spec.canonical_key(&start),
            learner,
            won,
            draw: outcome.winner().is_none(),
            winning_start,
            states_visited: trajectory.into_iter().map(|(k, _)| k).collect(),
        });
        self.history.last().expect("just pushed")
    }

    pub fn into_run(self) -> TrainingRun {
        TrainingRun {
            rounds_played: self.history.len(),
            mastered: self.mastered,
            seed: self.seed,
            history: self.history,
            table: self.table,
        }
    }
}

/// Every box's greedy action attains the oracle value of its position.
pub fn policy_matches_oracle(spec: &GameSpec, table: &BoxTable, oracle: &mut Solver) -> bool {
    table.boxes.iter().all(|(key, ws)| {
        let Some(state) = state_from_position_key(spec, key) else {
            return false;
        };
        let best = argmax(ws).expect("non-empty box");
        oracle.optimal_actions(&state).contains(&best)
    })
}

/// Rebuilds a state from a table key. Impartial keys are rebuilt with the first player to
/// move, which does not change the value or the legal moves.
pub fn state_from_position_key(spec: &GameSpec, key: &str) -> Option<GameState> {
    use crate::game::Position;
    use crate::games::{MancalaBoard, Piles, TicTacToeBoard};
    let mut parts = key.splitn(3, ':');
    let (_, mover, payload) = (parts.next()?, parts.next()?, parts.next()?);
    let to_move = match mover {
        "O" | "2" => PlayerId::Second,
        _ => PlayerId::First,
    };
    let position = match spec.config() {
        crate::game::GameConfig::TicTacToe {} => {
            Position::TicTacToe(TicTacToeBoard::parse(payload)?)
        }
        crate::game::GameConfig::Nim { n, .. } => {
            let (r, k) = payload.split_once('/')?;
            let mut pile = crate::games::Pile::new(n, k.parse().ok()?);
            pile.remaining = r.parse().ok()?;
            Position::Nim(pile)
        }
        crate::game::GameConfig::Euclid { .. } => {
            let (a, b) = payload.split_once(',')?;
            Position::Euclid(Piles::new(a.parse().ok()?, b.parse().ok()?))
        }
        crate::game::GameConfig::Mancala { .. } => {
            let pits: Option<Vec<u32>> = payload.split(',').map(|x| x.parse().ok()).collect();
            Position::Mancala(MancalaBoard::from_slots(pits?)?)
        }
    };
    Some(GameState::new(to_move, position))
}

/// Trains until mastery or `max_rounds` completed games.
pub fn train(
    spec: &GameSpec,
    opponent: Box<dyn Agent>,
    params: BoxParams,
    seed: u64,
    max_rounds: usize,
) -> TrainingRun {
    let mut trainer = BoxTrainer::new(*spec, opponent, params, seed);
    while !trainer.is_mastered() && trainer.rounds_played() < max_rounds {
        trainer.step();
    }
    trainer.into_run()
}

/// Replays recorded games into a fresh table, reinforcing both seats by their own result.
pub fn crowd_train<'a>(
    spec: &GameSpec,
    records: impl IntoIterator<Item = &'a GameRecord>,
    params: BoxParams,
) -> Result<BoxTable, BoxesError> {
    let mut table = BoxTable::new(params);
    crowd_train_into(&mut table, spec, records, |_, _| true)?;
    Ok(table)
}

/// Replays records into `table`, reinforcing the seats accepted by `learns`.
pub fn crowd_train_into<'a>(
    table: &mut BoxTable,
    spec: &GameSpec,
    records: impl IntoIterator<Item = &'a GameRecord>,
    learns: impl Fn(&GameRecord, PlayerId) -> bool,
) -> Result<(), BoxesError> {
    for rec in records {
        if rec.config != spec.config() {
            return Err(BoxesError::ConfigMismatch {
                record_id: rec.record_id.clone(),
                expected: spec.id(),
                found: rec.spec_id.clone(),
            });
        }
        let mut state = rec.start_state(spec);
        let mut trajectories: [Trajectory; 2] = [Vec::new(), Vec::new()];
        for m in &rec.moves {
            if learns(rec, m.player) {
                let (key, _) = table.ensure(spec, &state);
                trajectories[m.player.index()].push((key, m.action));
            }
            match spec.apply(&state, m.action) {
                Ok(next) => state = next,
                Err(_) => break,
            }
        }
        for p in PlayerId::BOTH {
            table.reinforce(&trajectories[p.index()], &rec.outcome, p);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u32,
    pub k: u32,
    pub seed: u64,
    pub rounds: usize,
    pub mastered: bool,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("N,K,seed,L,mastered\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n, r.k, r.seed, r.rounds, r.mastered
        );
    }
    out
}

pub fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}
