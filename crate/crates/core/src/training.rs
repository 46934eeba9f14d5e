//! The evaluate / loss / update heuristic refinement loop.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{play_match_from, Agent, AgentDescriptor, AgentError};
use crate::boxes::{BoxParams, BoxTrainer, BoxesAgent};
use crate::exact::{winning_seat, Solver};
use crate::game::{GameSpec, GameState, PlayerId};

/// A named policy under training.
pub struct Heuristic {
    pub id: String,
    /// Free-form description: formula text, table reference, prompt text.
    pub metadata: String,
    pub policy: Box<dyn Agent>,
}

impl Heuristic {
    pub fn new(id: impl Into<String>, metadata: impl Into<String>, policy: Box<dyn Agent>) -> Self {
        Heuristic {
            id: id.into(),
            metadata: metadata.into(),
            policy,
        }
    }
}

impl std::fmt::Debug for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Heuristic")
            .field("id", &self.id)
            .field("metadata", &self.metadata)
            .finish()
    }
}

/// One evaluation game: the heuristic takes `seat` from `start` against `opponent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalCase {
    pub spec: GameSpec,
    pub start: GameState,
    pub seat: PlayerId,
    pub opponent: AgentDescriptor,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub rewards: Vec<f64>,
    pub faults: Vec<bool>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainingError {
    #[error("loss of an empty reward list")]
    EmptyRewards,
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("max_k must be at least 1")]
    NoIterations,
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("loss stayed above the threshold for {max_k} iterations")]
    MaxIterations {
        max_k: usize,
        history: TrainingHistory,
    },
}

pub fn evaluate(h: &mut Heuristic, dataset: &[EvalCase]) -> Result<Evaluation, TrainingError> {
    let mut out = Evaluation::default();
    for case in dataset {
        let mut opponent = case.opponent.build(&case.spec)?;
        let rec = match case.seat {
            PlayerId::First => play_match_from(
                &case.spec,
                &case.start,
                h.policy.as_mut(),
                opponent.as_mut(),
                case.seed,
            ),
            PlayerId::Second => play_match_from(
                &case.spec,
                &case.start,
                opponent.as_mut(),
                h.policy.as_mut(),
                case.seed,
            ),
        };
        out.rewards.push(rec.outcome.reward(case.seat) as f64);
        out.faults.push(rec.forfeit == Some(case.seat));
    }
    Ok(out)
}

/// Fraction of value lost: `1 - (mean(R) + 1) / 2`. Zero means every game was won.
pub fn loss(rewards: &[f64]) -> Result<f64, TrainingError> {
    if rewards.is_empty() {
        return Err(TrainingError::EmptyRewards);
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(1.0 - (mean + 1.0) / 2.0)
}

/// Supplies the evaluation set for iteration `k`.
pub trait DataSource {
    fn cases(&mut self, k: usize) -> Vec<EvalCase>;
}

/// The same cases every iteration.
#[derive(Clone, Debug)]
pub struct FixedDataset(pub Vec<EvalCase>);

impl DataSource for FixedDataset {
    fn cases(&mut self, _: usize) -> Vec<EvalCase> {
        self.0.clone()
    }
}

/// The same positions with seeds derived from the iteration number.
#[derive(Clone, Debug)]
pub struct ReseededDataset(pub Vec<EvalCase>);

impl DataSource for ReseededDataset {
    fn cases(&mut self, k: usize) -> Vec<EvalCase> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, c)| EvalCase {
                seed: c.seed ^ ((k as u64) << 32) ^ i as u64,
                ..c.clone()
            })
            .collect()
    }
}

/// For every curriculum start with a decided value, a case that seats the heuristic on the
/// winning side.
pub fn winning_start_cases(spec: &GameSpec, opponent: AgentDescriptor, seed: u64) -> Vec<EvalCase> {
    let mut solver = Solver::new(*spec);
    spec.curriculum_starts()
        .into_iter()
        .enumerate()
        .filter_map(|(i, start)| {
            let seat = winning_seat(&mut solver, &start)?;
            Some(EvalCase {
                spec: *spec,
                start,
                seat,
                opponent: opponent.clone(),
                seed: seed.wrapping_add(i as u64),
            })
        })
        .collect()
}

/// How the heuristic changes between iterations.
pub enum UpdateRule {
    Identity,
    /// One Boxes training round per update; the heuristic is the table's greedy policy.
    Boxes(Box<BoxTrainer>),
    /// Hand-written replacements, applied in order; the last one is kept once exhausted.
    Scripted(VecDeque<Heuristic>),
}

impl UpdateRule {
    pub fn boxes(spec: GameSpec, opponent: Box<dyn Agent>, params: BoxParams, seed: u64) -> Self {
        UpdateRule::Boxes(Box::new(BoxTrainer::new(spec, opponent, params, seed)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            UpdateRule::Identity => "identity",
            UpdateRule::Boxes(_) => "boxes",
            UpdateRule::Scripted(_) => "scripted",
        }
    }

    /// The heuristic the Boxes adapter currently stands for.
    pub fn boxes_heuristic(trainer: &BoxTrainer) -> Heuristic {
        let rounds = trainer.rounds_played();
        Heuristic::new(
            format!("boxes@{rounds}"),
            format!(
                "greedy policy of a {}-box table after {rounds} rounds",
                trainer.table().len()
            ),
            Box::new(BoxesAgent::greedy(trainer.table().clone(), "boxes")),
        )
    }

    pub fn update(&mut self, h: Heuristic, _rewards: &[f64]) -> Heuristic {
        match self {
            UpdateRule::Identity => h,
            UpdateRule::Boxes(trainer) => {
                trainer.step();
                Self::boxes_heuristic(trainer)
            }
            UpdateRule::Scripted(queue) => queue.pop_front().unwrap_or(h),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub k: usize,
    pub heuristic_id: String,
    pub rewards: Vec<f64>,
    pub loss: f64,
}

impl Iteration {
    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().sum::<f64>() / self.rewards.len() as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub iterations: Vec<Iteration>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.iterations.last().map(|i| i.loss)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,heuristic_id,mean_reward,loss\n");
        for it in &self.iterations {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                it.k,
                it.heuristic_id,
                it.mean_reward(),
                it.loss
            );
        }
        out
    }
}

#[derive(Debug)]
pub struct TrainingResult {
    pub heuristic: Heuristic,
    pub history: TrainingHistory,
}

/// Evaluates, tests the loss against `tau`, updates, and repeats. Every evaluation is
/// recorded, including the one that meets the threshold.
pub fn run_training(
    h0: Heuristic,
    data: &mut dyn DataSource,
    update: &mut UpdateRule,
    tau: f64,
    max_k: usize,
) -> Result<TrainingResult, TrainingError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(TrainingError::InvalidThreshold(tau));
    }
    if max_k == 0 {
        return Err(TrainingError::NoIterations);
    }
    let mut h = h0;
    let mut history = TrainingHistory::default();
    let mut k = 1;
    loop {
        let cases = data.cases(k);
        let r = evaluate(&mut h, &cases)?.rewards;
        let l = loss(&r)?;
        history.iterations.push(Iteration {
            k,
            heuristic_id: h.id.clone(),
            rewards: r.clone(),
            loss: l,
        });
        if l <= tau {
            return Ok(TrainingResult {
                heuristic: h,
                history,
            });
        }
        if k == max_k {
            return Err(TrainingError::MaxIterations { max_k, history });
        }
        h = update.update(h, &r);
        k += 1;
    }
}
