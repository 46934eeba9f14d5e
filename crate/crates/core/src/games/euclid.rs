//! The Game of Euclid: two piles `a >= b`; a move removes a positive multiple of the
//! smaller pile from the larger one. Whoever empties a pile wins.

use serde::{Deserialize, Serialize};

use crate::game::Action;

/// Piles kept normalized so that `a >= b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Piles {
    pub a: u64,
    pub b: u64,
}

impl Piles {
    pub fn new(x: u64, y: u64) -> Self {
        Piles {
            a: x.max(y),
            b: x.min(y),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.b == 0
    }

    pub fn max_multiplier(&self) -> u64 {
        if self.b == 0 {
            0
        } else {
            self.a / self.b
        }
    }

    pub fn legal_actions(&self) -> Vec<Action> {
        let q = self.max_multiplier().min(Action::MAX as u64) as Action;
        (1..=q).collect()
    }

    pub fn is_legal(&self, m: Action) -> bool {
        m >= 1 && (m as u64) <= self.max_multiplier()
    }

    pub fn reduce(&self, m: Action) -> Piles {
        Piles::new(self.a - m as u64 * self.b, self.b)
    }

    pub fn key_payload(&self) -> String {
        format!("{},{}", self.a, self.b)
    }

    pub fn pack(&self) -> Option<u128> {
        if self.a > u64::MAX >> 1 {
            return None;
        }
        Some(((self.a as u128) << 64) | self.b as u128)
    }
}
