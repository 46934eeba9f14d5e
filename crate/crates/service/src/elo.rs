//! Elo ratings for human participants against fixed-rating agent anchors.

use std::collections::BTreeMap;

use gamebot_core::search::Difficulty;
use gamebot_core::{AgentDescriptor, GameRecord, PlayerId};
use serde::{Deserialize, Serialize};

pub const K_FACTOR: f64 = 32.0;
pub const INITIAL_RATING: f64 = 1200.0;

/// Seat names of the form `human:<name>` are people; anything else is an agent descriptor.
pub const HUMAN_PREFIX: &str = "human:";

pub fn expected_score(rating: f64, opponent: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((opponent - rating) / 400.0))
}

/// Rating change for a result `score` (1 win, 0.5 draw, 0 loss).
pub fn rating_delta(rating: f64, opponent: f64, score: f64) -> f64 {
    K_FACTOR * (score - expected_score(rating, opponent))
}

/// Fixed rating of an agent.
pub fn anchor_rating(agent: &AgentDescriptor) -> f64 {
    match agent {
        AgentDescriptor::Minimax(Difficulty::Easy) => 1000.0,
        AgentDescriptor::Minimax(Difficulty::Medium) => 1400.0,
        AgentDescriptor::Minimax(Difficulty::Hard) => 1800.0,
        AgentDescriptor::MinimaxDepth(d) if *d <= Difficulty::Easy.depth() => 1000.0,
        AgentDescriptor::MinimaxDepth(d) if *d <= Difficulty::Medium.depth() => 1400.0,
        AgentDescriptor::MinimaxDepth(_) => 1800.0,
        AgentDescriptor::Exact | AgentDescriptor::Dictionary => 2000.0,
        AgentDescriptor::Llm(_) => 1500.0,
        AgentDescriptor::Boxes(_) | AgentDescriptor::Heuristic(_) => 1200.0,
        AgentDescriptor::Random => 800.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Participant {
    Human(String),
    Agent(AgentDescriptor),
}

impl Participant {
    pub fn from_seat(seat: &str) -> Participant {
        match seat.strip_prefix(HUMAN_PREFIX) {
            Some(name) => Participant::Human(name.to_string()),
            None => seat
                .parse()
                .map(Participant::Agent)
                .unwrap_or_else(|_| Participant::Human(seat.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub participant: String,
    pub rating: f64,
    pub games: u32,
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
}

impl LeaderboardEntry {
    fn new(participant: &str) -> Self {
        LeaderboardEntry {
            participant: participant.to_string(),
            rating: INITIAL_RATING,
            games: 0,
            wins: 0,
            draws: 0,
            losses: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingDelta {
    pub participant: String,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Leaderboard {
    entries: BTreeMap<String, LeaderboardEntry>,
}

impl Leaderboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, participant: &str) -> Option<&LeaderboardEntry> {
        self.entries.get(participant)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Applies one finished game. Every human seat is rated against its opponent's rating
    /// before the game: an anchor for agents, the current rating for humans. Agent-only games
    /// change nothing.
    pub fn apply(&mut self, record: &GameRecord) -> Vec<RatingDelta> {
        let seats = [
            Participant::from_seat(&record.agents.first),
            Participant::from_seat(&record.agents.second),
        ];
        let rating_of = |board: &Self, p: &Participant| match p {
            Participant::Human(name) => {
                board.entries.get(name).map_or(INITIAL_RATING, |e| e.rating)
            }
            Participant::Agent(a) => anchor_rating(a),
        };
        let before = [rating_of(self, &seats[0]), rating_of(self, &seats[1])];
        let mut deltas = Vec::new();
        for (i, seat) in PlayerId::BOTH.into_iter().enumerate() {
            let Participant::Human(name) = &seats[i] else {
                continue;
            };
            let reward = record.outcome.reward(seat);
            let score = (reward as f64 + 1.0) / 2.0;
            let delta = rating_delta(before[i], before[1 - i], score);
            let entry = self
                .entries
                .entry(name.clone())
                .or_insert_with(|| LeaderboardEntry::new(name));
            entry.rating += delta;
            entry.games += 1;
            match reward {
                1 => entry.wins += 1,
                0 => entry.draws += 1,
                _ => entry.losses += 1,
            }
            deltas.push(RatingDelta {
                participant: name.clone(),
                before: before[i],
                after: entry.rating,
                delta,
            });
        }
        deltas
    }

    /// Rating descending, then fewer games, then name.
    pub fn ranked(&self, limit: usize) -> Vec<LeaderboardEntry> {
        let mut all: Vec<LeaderboardEntry> = self.entries.values().cloned().collect();
        all.sort_by(|a, b| {
            b.rating
                .total_cmp(&a.rating)
                .then(a.games.cmp(&b.games))
                .then_with(|| a.participant.cmp(&b.participant))
        });
        all.truncate(limit);
        all
    }
}
