//! Single-pile misère Nim: players alternately remove between 1 and `K` stones and
//! whoever takes the last stone loses.

use serde::{Deserialize, Serialize};

use crate::game::Action;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pile {
    pub remaining: u32,
    pub max_take: u32,
    pub initial: u32,
}

impl Pile {
    pub fn new(n: u32, k: u32) -> Self {
        Pile {
            remaining: n,
            max_take: k,
            initial: n,
        }
    }

    pub fn legal_actions(&self) -> Vec<Action> {
        (1..=self.max_take.min(self.remaining)).collect()
    }

    pub fn is_legal(&self, take: Action) -> bool {
        take >= 1 && take <= self.max_take.min(self.remaining)
    }

    pub fn take(&self, take: Action) -> Pile {
        Pile {
            remaining: self.remaining - take,
            ..*self
        }
    }

    pub fn key_payload(&self) -> String {
        format!("{}/{}", self.remaining, self.max_take)
    }

    pub fn pack(&self) -> u128 {
        ((self.remaining as u128) << 32) | self.max_take as u128
    }
}
