//! Tic-tac-toe on a 3x3 board with cells numbered 0..8, row-major from the top-left.
//! The first player marks `X`.

use serde::{Deserialize, Serialize};

use crate::game::{Action, PlayerId};

pub const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

pub const CELL_NAMES: [&str; 9] = [
    "Top-Left",
    "Top-Center",
    "Top-Right",
    "Middle-Left",
    "Center",
    "Middle-Right",
    "Bottom-Left",
    "Bottom-Center",
    "Bottom-Right",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    X,
    O,
}

impl Cell {
    pub fn of(player: PlayerId) -> Cell {
        match player {
            PlayerId::First => Cell::X,
            PlayerId::Second => Cell::O,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::X => 'X',
            Cell::O => 'O',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Board {
    pub cells: [Cell; 9],
}

impl Board {
    pub fn empty() -> Self {
        Board {
            cells: [Cell::Empty; 9],
        }
    }

    /// Builds a board from a 9-character string over `.XO`.
    pub fn parse(s: &str) -> Option<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 9 {
            return None;
        }
        let mut cells = [Cell::Empty; 9];
        for (cell, c) in cells.iter_mut().zip(chars) {
            *cell = match c {
                '.' => Cell::Empty,
                'X' | 'x' => Cell::X,
                'O' | 'o' => Cell::O,
                _ => return None,
            };
        }
        Some(Board { cells })
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }

    /// Player whose turn it is on a board reached by legal play from the empty board.
    pub fn mover(&self) -> PlayerId {
        if self.count(Cell::X) > self.count(Cell::O) {
            PlayerId::Second
        } else {
            PlayerId::First
        }
    }

    pub fn winner(&self) -> Option<PlayerId> {
        LINES.iter().find_map(|line| {
            let c = self.cells[line[0]];
            if c != Cell::Empty && line.iter().all(|&i| self.cells[i] == c) {
                Some(if c == Cell::X {
                    PlayerId::First
                } else {
                    PlayerId::Second
                })
            } else {
                None
            }
        })
    }

    /// Number of completed lines, per mark.
    pub fn line_counts(&self) -> (usize, usize) {
        let mut x = 0;
        let mut o = 0;
        for line in LINES {
            match line.map(|i| self.cells[i]) {
                [Cell::X, Cell::X, Cell::X] => x += 1,
                [Cell::O, Cell::O, Cell::O] => o += 1,
                _ => {}
            }
        }
        (x, o)
    }

    pub fn is_full(&self) -> bool {
        !self.cells.contains(&Cell::Empty)
    }

    pub fn is_terminal(&self) -> bool {
        self.winner().is_some() || self.is_full()
    }

    pub fn legal_actions(&self) -> Vec<Action> {
        if self.is_terminal() {
            return Vec::new();
        }
        (0..9u32)
            .filter(|&i| self.cells[i as usize] == Cell::Empty)
            .collect()
    }

    pub fn is_legal(&self, action: Action) -> bool {
        action < 9 && self.cells[action as usize] == Cell::Empty && !self.is_terminal()
    }

    pub fn place(&self, action: Action, player: PlayerId) -> Board {
        let mut next = *self;
        next.cells[action as usize] = Cell::of(player);
        next
    }

    pub fn key_payload(&self) -> String {
        self.cells.iter().map(|c| c.symbol()).collect()
    }

    pub fn pack(&self) -> u128 {
        self.cells.iter().fold(0u128, |acc, c| {
            (acc << 2)
                | match c {
                    Cell::Empty => 0,
                    Cell::X => 1,
                    Cell::O => 2,
                }
        })
    }

    /// Three-line text rendering for terminals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in 0..3 {
            let line: Vec<String> = (0..3)
                .map(|col| {
                    let i = row * 3 + col;
                    match self.cells[i] {
                        Cell::Empty => i.to_string(),
                        c => c.symbol().to_string(),
                    }
                })
                .collect();
            out.push_str(&line.join(" | "));
            out.push('\n');
        }
        out
    }
}
