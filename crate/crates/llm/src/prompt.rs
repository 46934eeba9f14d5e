//! State-to-prompt serializers.
//!
//! Every prompt is a fixed template with named `{placeholders}` filled from the state. The
//! wording of each template is frozen; golden files under `fixtures/v1` pin the output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use gamebot_core::games::{MancalaBoard, Pile, Piles, TicTacToeBoard};
use gamebot_core::{GameKind, GameSpec, GameState, PlayerId, Position};

pub type Bindings = BTreeMap<&'static str, String>;

pub const TICTACTOE_TEMPLATE: &str = "Current Configuration: {configuration}\n\
Objective: Analyze the board state and execute the optimal move for Player '{mover}' to prevent a loss or secure a win.";

pub const NIM_TEMPLATE: &str = "Game Status: A single pile remains containing {stones}.\n\
Constraints: You are permitted to remove {choices}. Taking the final stone results in a loss.\n\
Task: Apply the winning mathematical strategy (Nim-sum analysis) to calculate the precise number of stones to remove this turn. Provide a brief rationale for your decision.";

pub const EUCLID_TEMPLATE: &str = "Game Status: Two piles contain {larger} and {smaller} stones.\n\
Constraints: Remove a positive multiple m of {smaller} stones from the pile of {larger}, with m between 1 and {max_multiplier}. Emptying a pile wins the game.\n\
Task: State the multiplier m to play this turn. Provide a brief rationale for your decision.";

pub const MANCALA_TEMPLATE: &str = "State Representation:\n\
{bottom_label} (Bottom Row): {bottom_pits}. Store: {bottom_store}.\n\
{top_label} (Top Row): {top_pits}. Store: {top_store}.\n\
Instruction: Utilize game-tree analysis to determine the move that yields the highest strategic advantage from this position.";

pub const MANCALA_CRITIQUE_TEMPLATE: &str = "State Analysis:\n\
{bottom_label} (Bottom): {bottom_pits}. Store: {bottom_store}.\n\
{top_label} (Top): {top_pits}. Store: {top_store}.\n\
Task: It is the AI's turn. Identify the optimal move sequence. Additionally, critique a potential suboptimal move to illustrate strategic errors.";

/// A prompt template with named placeholders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
}

impl Template {
    /// Replaces every `{name}` with its binding. Unknown placeholders are left as written.
    pub fn render(&self, bindings: &Bindings) -> String {
        let mut out = String::with_capacity(self.text.len() + 64);
        let mut rest = self.text;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) if bindings.contains_key(&after[..close]) => {
                    out.push_str(&bindings[&after[..close]]);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }

    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let mut rest = self.text;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let Some(close) = after.find('}') else { break };
            names.push(&after[..close]);
            rest = &after[close + 1..];
        }
        names
    }
}

pub const TICTACTOE: Template = Template {
    name: "tictactoe_move",
    text: TICTACTOE_TEMPLATE,
};
pub const NIM: Template = Template {
    name: "nim_move",
    text: NIM_TEMPLATE,
};
pub const EUCLID: Template = Template {
    name: "euclid_move",
    text: EUCLID_TEMPLATE,
};
pub const MANCALA: Template = Template {
    name: "mancala_move",
    text: MANCALA_TEMPLATE,
};
pub const MANCALA_CRITIQUE: Template = Template {
    name: "mancala_critique",
    text: MANCALA_CRITIQUE_TEMPLATE,
};

/// The move-query template for a game.
pub fn template_for(kind: GameKind) -> Template {
    match kind {
        GameKind::TicTacToe => TICTACTOE,
        GameKind::Nim => NIM,
        GameKind::Euclid => EUCLID,
        GameKind::Mancala => MANCALA,
    }
}

/// Placeholder bindings for the move-query template of the state's game.
pub fn bindings(state: &GameState) -> Bindings {
    match &state.payload {
        Position::TicTacToe(b) => tictactoe_bindings(b, state.to_move),
        Position::Nim(p) => nim_bindings(p),
        Position::Euclid(p) => euclid_bindings(p),
        Position::Mancala(b) => {
            mancala_bindings(b, state.to_move, ["Agent", "Opponent"], row_listing)
        }
    }
}

/// Renders the move-query prompt for a state.
pub fn serialize_state(spec: &GameSpec, state: &GameState) -> String {
    template_for(spec.kind()).render(&bindings(state))
}

/// Renders the critique prompt for a Mancala state; `None` for other games.
pub fn serialize_critique(state: &GameState) -> Option<String> {
    let Position::Mancala(b) = &state.payload else {
        return None;
    };
    Some(MANCALA_CRITIQUE.render(&mancala_bindings(
        b,
        state.to_move,
        ["AI", "Player"],
        row_summary,
    )))
}

const CELL_NAMES: [&str; 9] = [
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

pub fn cell_name(cell: usize) -> &'static str {
    CELL_NAMES[cell]
}

fn tictactoe_bindings(board: &TicTacToeBoard, to_move: PlayerId) -> Bindings {
    let mut config = String::new();
    let mut empty = 0;
    for (i, cell) in board.cells.iter().enumerate() {
        match cell.symbol() {
            '.' => empty += 1,
            s => {
                let _ = write!(
                    config,
                    "Cell {i} ({}) is occupied by '{s}'. ",
                    CELL_NAMES[i]
                );
            }
        }
    }
    config.push_str(match empty {
        9 => "All cells are empty.",
        0 => "No cells are empty.",
        _ => "All remaining cells are empty.",
    });
    let mover = gamebot_core::games::Cell::of(to_move).symbol().to_string();
    Bindings::from([("configuration", config), ("mover", mover)])
}

fn plural(n: u64, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

/// "1", "1 or 2", "1, 2, or 3".
fn choice_list(max: u32) -> String {
    match max {
        0 => "0".into(),
        1 => "1".into(),
        2 => "1 or 2".into(),
        _ => {
            let head: Vec<String> = (1..max).map(|t| t.to_string()).collect();
            format!("{}, or {max}", head.join(", "))
        }
    }
}

fn nim_bindings(pile: &Pile) -> Bindings {
    let max = pile.max_take.min(pile.remaining);
    let choices = format!(
        "{} {}",
        choice_list(max),
        if max == 1 { "stone" } else { "stones" }
    );
    Bindings::from([
        ("stones", plural(pile.remaining as u64, "stone", "stones")),
        ("choices", choices),
    ])
}

fn euclid_bindings(piles: &Piles) -> Bindings {
    Bindings::from([
        ("larger", piles.a.to_string()),
        ("smaller", piles.b.to_string()),
        ("max_multiplier", piles.max_multiplier().to_string()),
    ])
}

/// "Pit 0: 4 seeds, Pit 1: 1 seed".
fn row_listing(board: &MancalaBoard, player: PlayerId) -> String {
    board
        .row_range(player)
        .map(|i| format!("Pit {i}: {}", plural(board.pits[i] as u64, "seed", "seeds")))
        .collect::<Vec<_>>()
        .join(", ")
}

/// "Pits 0 and 1 each contain 2 seeds" when the row is uniform, else one clause per pit.
fn row_summary(board: &MancalaBoard, player: PlayerId) -> String {
    let range = board.row_range(player);
    let seeds = &board.pits[range.clone()];
    let names: Vec<String> = range.clone().map(|i| i.to_string()).collect();
    if seeds.len() > 1 && seeds.iter().all(|&s| s == seeds[0]) {
        let list = match names.len() {
            2 => format!("{} and {}", names[0], names[1]),
            n => format!("{}, and {}", names[..n - 1].join(", "), names[n - 1]),
        };
        return format!(
            "Pits {list} each contain {}",
            plural(seeds[0] as u64, "seed", "seeds")
        );
    }
    range
        .map(|i| {
            format!(
                "Pit {i} contains {}",
                plural(board.pits[i] as u64, "seed", "seeds")
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Bottom row first. `labels` is (mover, other).
fn mancala_bindings(
    board: &MancalaBoard,
    to_move: PlayerId,
    labels: [&str; 2],
    row: fn(&MancalaBoard, PlayerId) -> String,
) -> Bindings {
    let label = |p: PlayerId| if p == to_move { labels[0] } else { labels[1] }.to_string();
    Bindings::from([
        ("bottom_label", label(PlayerId::First)),
        ("bottom_pits", row(board, PlayerId::First)),
        ("bottom_store", board.store(PlayerId::First).to_string()),
        ("top_label", label(PlayerId::Second)),
        ("top_pits", row(board, PlayerId::Second)),
        ("top_store", board.store(PlayerId::Second).to_string()),
    ])
}

/// Text describing the legal moves, used by the retry instruction.
pub fn describe_actions(actions: &[u32]) -> String {
    let contiguous = actions.windows(2).all(|w| w[1] == w[0] + 1);
    match actions {
        [] => "none".into(),
        [only] => only.to_string(),
        [first, .., last] if contiguous && actions.len() > 3 => format!("{first} to {last}"),
        _ => actions
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    }
}
