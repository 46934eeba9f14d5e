//! Terminal play: the human is an agent that reads moves from a line source.

use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Result};
use gamebot_core::{
    play_match, Action, Agent, GameRecord, GameSpec, GameState, PlayerId, TurnContext,
};

use crate::render;

pub type Log = Arc<Mutex<Box<dyn Write + Send>>>;

fn say(log: &Log, text: &str) {
    let mut w = log.lock().unwrap();
    let _ = w.write_all(text.as_bytes());
    let _ = w.flush();
}

/// Reads moves from `input`, re-prompting on anything that is not a legal move. When the
/// input ends it returns an out-of-range action and sets `ended`.
pub struct HumanAgent {
    name: String,
    input: Box<dyn BufRead + Send>,
    log: Log,
    pub ended: Arc<Mutex<bool>>,
}

impl HumanAgent {
    pub fn new(name: &str, input: Box<dyn BufRead + Send>, log: Log) -> Self {
        HumanAgent {
            name: name.to_string(),
            input,
            log,
            ended: Arc::new(Mutex::new(false)),
        }
    }
}

pub const NO_MOVE: Action = Action::MAX;

impl Agent for HumanAgent {
    fn descriptor(&self) -> String {
        format!("human:{}", self.name)
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, _: &mut TurnContext<'_>) -> Action {
        let legal = spec.legal_actions(state);
        say(&self.log, &format!("\n{}", render::board(state)));
        loop {
            let list: Vec<String> = legal.iter().map(|a| a.to_string()).collect();
            say(
                &self.log,
                &format!("{} [{}]: ", render::bold("Your move"), list.join(", ")),
            );
            let mut line = String::new();
            match self.input.read_line(&mut line) {
                Ok(0) | Err(_) => {
                    say(&self.log, "\n");
                    *self.ended.lock().unwrap() = true;
                    return NO_MOVE;
                }
                Ok(_) => {}
            }
            match spec.parse_action(&line) {
                Some(a) if legal.contains(&a) => return a,
                _ => say(
                    &self.log,
                    &format!("'{}' is not a legal move.\n", line.trim()),
                ),
            }
        }
    }
}

/// Passes moves through and reports each one with its reasoning.
pub struct Narrated {
    inner: Box<dyn Agent>,
    log: Log,
}

impl Narrated {
    pub fn new(inner: Box<dyn Agent>, log: Log) -> Self {
        Narrated { inner, log }
    }
}

impl Agent for Narrated {
    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action {
        let a = self.inner.select(spec, state, ctx);
        say(
            &self.log,
            &format!("{} plays {a}.\n", self.inner.descriptor()),
        );
        if let Some(r) = self.inner.reasoning() {
            say(&self.log, &format!("  {r}\n"));
        }
        a
    }

    fn reasoning(&self) -> Option<String> {
        self.inner.reasoning()
    }
}

/// Plays one game and returns its record. Fails when the input ends before the game does.
pub fn play(
    spec: &GameSpec,
    opponent: Box<dyn Agent>,
    seat: PlayerId,
    name: &str,
    seed: u64,
    input: Box<dyn BufRead + Send>,
    log: Log,
) -> Result<GameRecord> {
    let mut human = HumanAgent::new(name, input, log.clone());
    let ended = human.ended.clone();
    let mut program = Narrated::new(opponent, log.clone());
    let record = match seat {
        PlayerId::First => play_match(spec, &mut human, &mut program, seed),
        PlayerId::Second => play_match(spec, &mut program, &mut human, seed),
    };
    if *ended.lock().unwrap() {
        bail!("input ended before the game finished");
    }
    let final_state = record.replay()?;
    say(&log, &format!("\n{}", render::board(&final_state)));
    say(
        &log,
        &format!(
            "{}\n",
            render::bold(&render::outcome(&record.outcome, seat))
        ),
    );
    Ok(record)
}
