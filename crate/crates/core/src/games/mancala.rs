//! Mancala under Kalah rules.
//!
//! With `p` pits per side the board has `2p + 2` slots: the bottom row `0..p` belongs to
//! the first player with its store at `p`; the top row `p+1..2p+1` belongs to the second
//! player with its store at `2p + 1`. For the standard 6-pit board that is pits 0..5,
//! store 6, pits 7..12, store 13. Sowing runs counterclockwise (ascending index) and skips
//! the opponent's store.
//!
//! * Last seed in the mover's own store: the mover plays again.
//! * Last seed in an empty pit of the mover's row while the opposite pit holds seeds: both
//!   the landing seed and the opposite pit go to the mover's store.
//! * When the player to move has an empty row the game ends and the opponent sweeps the
//!   rest of their row into their store. The larger store wins.

use serde::{Deserialize, Serialize};

use crate::game::{Action, Outcome, PlayerId};

pub const MAX_PITS_PER_SIDE: u32 = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Board {
    pub pits: Vec<u32>,
}

impl Board {
    pub fn new(pits_per_side: u32, seeds_per_pit: u32) -> Self {
        let p = pits_per_side as usize;
        let mut pits = vec![seeds_per_pit; 2 * p + 2];
        pits[p] = 0;
        pits[2 * p + 1] = 0;
        Board { pits }
    }

    /// Builds a board from raw slot counts (`2p + 2` entries).
    pub fn from_slots(pits: Vec<u32>) -> Option<Self> {
        if pits.len() < 4 || pits.len() % 2 != 0 {
            return None;
        }
        Some(Board { pits })
    }

    pub fn pits_per_side(&self) -> usize {
        self.pits.len() / 2 - 1
    }

    pub fn store_index(&self, player: PlayerId) -> usize {
        let p = self.pits_per_side();
        match player {
            PlayerId::First => p,
            PlayerId::Second => 2 * p + 1,
        }
    }

    pub fn row_range(&self, player: PlayerId) -> std::ops::Range<usize> {
        let p = self.pits_per_side();
        match player {
            PlayerId::First => 0..p,
            PlayerId::Second => p + 1..2 * p + 1,
        }
    }

    pub fn owner(&self, slot: usize) -> Option<PlayerId> {
        PlayerId::BOTH
            .into_iter()
            .find(|&pl| self.row_range(pl).contains(&slot))
    }

    pub fn opposite(&self, pit: usize) -> usize {
        2 * self.pits_per_side() - pit
    }

    pub fn store(&self, player: PlayerId) -> u32 {
        self.pits[self.store_index(player)]
    }

    pub fn row_seeds(&self, player: PlayerId) -> u32 {
        self.pits[self.row_range(player)].iter().sum()
    }

    pub fn row_is_empty(&self, player: PlayerId) -> bool {
        self.row_seeds(player) == 0
    }

    pub fn total_seeds(&self) -> u32 {
        self.pits.iter().sum()
    }

    pub fn legal_actions(&self, player: PlayerId) -> Vec<Action> {
        self.row_range(player)
            .filter(|&i| self.pits[i] > 0)
            .map(|i| i as Action)
            .collect()
    }

    pub fn is_legal(&self, player: PlayerId, action: Action) -> bool {
        let i = action as usize;
        self.row_range(player).contains(&i) && self.pits[i] > 0
    }

    /// Sows from `pit` and returns the new board together with the next player to move.
    pub fn sow(&self, player: PlayerId, pit: Action) -> (Board, PlayerId) {
        let mut board = self.clone();
        let len = board.pits.len();
        let own_store = board.store_index(player);
        let skip = board.store_index(player.opponent());
        let mut seeds = board.pits[pit as usize];
        board.pits[pit as usize] = 0;
        let mut idx = pit as usize;
        while seeds > 0 {
            idx = (idx + 1) % len;
            if idx == skip {
                continue;
            }
            board.pits[idx] += 1;
            seeds -= 1;
        }

        let next = if idx == own_store {
            player
        } else {
            if board.row_range(player).contains(&idx) && board.pits[idx] == 1 {
                let opp = board.opposite(idx);
                if board.pits[opp] > 0 {
                    board.pits[own_store] += board.pits[opp] + 1;
                    board.pits[opp] = 0;
                    board.pits[idx] = 0;
                }
            }
            player.opponent()
        };

        if board.row_is_empty(next) {
            let other = next.opponent();
            let swept: u32 = board.row_range(other).map(|i| board.pits[i]).sum();
            for i in board.row_range(other) {
                board.pits[i] = 0;
            }
            let store = board.store_index(other);
            board.pits[store] += swept;
        }
        (board, next)
    }

    /// Final score comparison. Row seeds are counted for whoever still holds them so the
    /// result is well defined on unswept boards.
    pub fn final_outcome(&self) -> Outcome {
        let first = self.store(PlayerId::First) + self.row_seeds(PlayerId::First);
        let second = self.store(PlayerId::Second) + self.row_seeds(PlayerId::Second);
        match first.cmp(&second) {
            std::cmp::Ordering::Greater => Outcome::win_for(PlayerId::First),
            std::cmp::Ordering::Less => Outcome::win_for(PlayerId::Second),
            std::cmp::Ordering::Equal => Outcome::draw(),
        }
    }

    pub fn key_payload(&self) -> String {
        self.pits
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn pack(&self) -> Option<u128> {
        let total = self.total_seeds().max(1);
        let bits = 32 - total.leading_zeros();
        if bits as usize * self.pits.len() > 126 {
            return None;
        }
        Some(
            self.pits
                .iter()
                .fold(0u128, |acc, &n| (acc << bits) | n as u128),
        )
    }

    /// Two-row text rendering with the top row shown right to left, as seen across a table.
    pub fn render(&self) -> String {
        let top: Vec<String> = self
            .row_range(PlayerId::Second)
            .rev()
            .map(|i| format!("{i:>2}:{:<2}", self.pits[i]))
            .collect();
        let bottom: Vec<String> = self
            .row_range(PlayerId::First)
            .map(|i| format!("{i:>2}:{:<2}", self.pits[i]))
            .collect();
        format!(
            "      {}\n[{:>2}]  {}  [{:>2}]\n      {}\n",
            top.join(" "),
            self.store(PlayerId::Second),
            " ".repeat(top.join(" ").len().saturating_sub(4)),
            self.store(PlayerId::First),
            bottom.join(" ")
        )
    }
}
