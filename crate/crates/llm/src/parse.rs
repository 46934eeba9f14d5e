//! Extracting a move from free-form response text.

use gamebot_core::{Action, GameSpec, GameState};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no legal move in response (numbers seen: {seen:?})")]
    NoLegalMove { seen: Vec<u64> },
}

/// Words that, directly followed by a number, name a move.
const MOVE_WORDS: &[&str] = &[
    "cell",
    "pit",
    "take",
    "remove",
    "multiplier",
    "m",
    "play",
    "move",
];

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Word(String),
    Number(u64),
    Other(&'a str),
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if !c.is_alphanumeric() {
            chars.next();
            continue;
        }
        let mut end = start;
        while let Some(&(i, c)) = chars.peek() {
            if !c.is_alphanumeric() {
                break;
            }
            end = i + c.len_utf8();
            chars.next();
        }
        let word = &text[start..end];
        let in_decimal = text[..start].ends_with('.')
            && text[..start - 1].ends_with(|c: char| c.is_ascii_digit())
            || text[end..].starts_with('.')
                && text[end + 1..].starts_with(|c: char| c.is_ascii_digit());
        tokens.push(if word.bytes().all(|b| b.is_ascii_digit()) {
            match word.parse::<u64>() {
                Ok(n) if !in_decimal => Token::Number(n),
                _ => Token::Other(word),
            }
        } else {
            Token::Word(word.to_lowercase())
        });
    }
    tokens
}

/// Numbers introduced by a move word, in order of appearance.
fn phrase_numbers(tokens: &[Token<'_>]) -> Vec<u64> {
    tokens
        .windows(2)
        .filter_map(|w| match (&w[0], &w[1]) {
            (Token::Word(word), Token::Number(n)) if MOVE_WORDS.contains(&word.as_str()) => {
                Some(*n)
            }
            _ => None,
        })
        .collect()
}

/// Takes the first legal move named by a phrase such as "Pit 2", "Cell 4" or "take 3";
/// failing that, the first whole-word integer that is legal, scanning left to right.
pub fn parse_move(
    spec: &GameSpec,
    response: &str,
    state: &GameState,
) -> Result<Action, ParseError> {
    let tokens = tokenize(response);
    let numbers: Vec<u64> = tokens
        .iter()
        .filter_map(|t| match t {
            Token::Number(n) => Some(*n),
            _ => None,
        })
        .collect();
    let legal = |n: &u64| u32::try_from(*n).is_ok_and(|a| spec.is_legal(state, a));
    phrase_numbers(&tokens)
        .iter()
        .chain(numbers.iter())
        .find(|n| legal(n))
        .map(|&n| n as Action)
        .ok_or(ParseError::NoLegalMove { seen: numbers })
}
