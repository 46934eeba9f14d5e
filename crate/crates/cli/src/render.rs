use std::io::IsTerminal;

use gamebot_core::{GameState, Outcome, PlayerId, Position};

/// True when stderr is a terminal and NO_COLOR is unset or empty.
pub fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stderr().is_terminal()
}

pub fn bold(text: &str) -> String {
    if use_color() {
        format!("\x1b[1m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

pub fn board(state: &GameState) -> String {
    match &state.payload {
        Position::TicTacToe(b) => b.render(),
        Position::Nim(p) => format!(
            "{} left, take 1 to {}\n",
            p.remaining,
            p.max_take.min(p.remaining)
        ),
        Position::Euclid(p) => format!("piles {} and {}\n", p.a, p.b),
        Position::Mancala(b) => b.render(),
    }
}

pub fn outcome(outcome: &Outcome, human: PlayerId) -> String {
    match outcome.winner() {
        None => "Draw.".into(),
        Some(p) if p == human => "You win.".into(),
        Some(_) => "The program wins.".into(),
    }
}
