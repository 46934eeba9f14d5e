use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::solver::{reachable_states, SolveError, Solver, STATE_CAP};
use crate::agent::{Agent, TurnContext};
use crate::game::{Action, GameSpec, GameState};

/// Precomputed best move and value for every reachable non-terminal position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DictionaryTable {
    pub spec_id: String,
    /// Position key to (best action, game value for the mover).
    pub entries: BTreeMap<String, (Action, i8)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DictionaryError {
    #[error("state {0} is not in the table")]
    UnknownState(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub fn build_dictionary(spec: &GameSpec) -> Result<DictionaryTable, SolveError> {
    let states = reachable_states(spec, &spec.initial(), STATE_CAP)?;
    let mut solver = Solver::new(*spec);
    let mut entries = BTreeMap::new();
    for s in states.iter().filter(|s| !spec.is_terminal(s)) {
        let action = solver.best_action(s).expect("non-terminal");
        let value = solver.value(s);
        entries.insert(spec.position_key(s), (action, value));
    }
    Ok(DictionaryTable {
        spec_id: spec.id(),
        entries,
    })
}

impl DictionaryTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(
        &self,
        spec: &GameSpec,
        state: &GameState,
    ) -> Result<(Action, i8), DictionaryError> {
        let key = spec.position_key(state);
        self.entries
            .get(&key)
            .copied()
            .ok_or(DictionaryError::UnknownState(key))
    }

    pub fn dictionary_move(
        &self,
        spec: &GameSpec,
        state: &GameState,
    ) -> Result<Action, DictionaryError> {
        self.lookup(spec, state).map(|(a, _)| a)
    }

    /// `key<TAB>action<TAB>value` lines sorted by key.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, (a, v)) in &self.entries {
            out.push_str(&format!("{k}\t{a}\t{v}\n"));
        }
        out
    }

    pub fn from_tsv(spec_id: &str, text: &str) -> Result<Self, DictionaryError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let err = |reason: &str| DictionaryError::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(k), Some(a), Some(v), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected three tab-separated fields"));
            };
            let a = a.parse().map_err(|_| err("bad action"))?;
            let v = v.parse().map_err(|_| err("bad value"))?;
            entries.insert(k.to_string(), (a, v));
        }
        Ok(DictionaryTable {
            spec_id: spec_id.to_string(),
            entries,
        })
    }
}

/// Plays straight from a dictionary table.
#[derive(Clone, Debug)]
pub struct DictionaryAgent {
    table: Arc<DictionaryTable>,
    name: String,
    last_value: Option<i8>,
}

impl DictionaryAgent {
    pub fn new(table: Arc<DictionaryTable>) -> Self {
        Self::with_descriptor(table, "dictionary")
    }

    pub fn with_descriptor(table: Arc<DictionaryTable>, name: &str) -> Self {
        DictionaryAgent {
            table,
            name: name.to_string(),
            last_value: None,
        }
    }
}

impl Agent for DictionaryAgent {
    fn descriptor(&self) -> String {
        self.name.clone()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, _: &mut TurnContext<'_>) -> Action {
        match self.table.lookup(spec, state) {
            Ok((a, v)) => {
                self.last_value = Some(v);
                a
            }
            // Unknown positions are a caller error; answer with an impossible move so the
            // match runner records the fault.
            Err(_) => {
                self.last_value = None;
                Action::MAX
            }
        }
    }

    fn reasoning(&self) -> Option<String> {
        self.last_value.map(|v| {
            let verdict = match v {
                1 => "a forced win",
                0 => "a draw with best play",
                _ => "lost against best play",
            };
            format!("Table lookup: this position is {verdict}.")
        })
    }
}
