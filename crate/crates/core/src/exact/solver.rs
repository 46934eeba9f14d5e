use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::game::{Action, GameSpec, GameState};

/// Reachable-state budget for exhaustive analysis.
pub const STATE_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("{game} has more than {cap} reachable states")]
    StateSpaceTooLarge { game: String, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum StateKey {
    Packed(u128),
    Text(String),
}

pub(crate) fn state_key(spec: &GameSpec, state: &GameState) -> StateKey {
    match spec.pack(state) {
        Some(p) => StateKey::Packed(p),
        None => StateKey::Text(spec.canonical_key(state)),
    }
}

/// Counts the states reachable from `start`, failing once more than `cap` are seen.
///
/// The walk is depth-first with one frame per ply, so memory is dominated by the visited set.
pub fn count_reachable(
    spec: &GameSpec,
    start: &GameState,
    cap: usize,
) -> Result<usize, SolveError> {
    walk(spec, start, cap, |_| {})
}

/// Every state reachable from `start`, in depth-first discovery order.
pub fn reachable_states(
    spec: &GameSpec,
    start: &GameState,
    cap: usize,
) -> Result<Vec<GameState>, SolveError> {
    count_reachable(spec, start, cap)?;
    let mut out = Vec::new();
    walk(spec, start, cap, |s| out.push(s.clone()))?;
    Ok(out)
}

fn walk(
    spec: &GameSpec,
    start: &GameState,
    cap: usize,
    mut visit: impl FnMut(&GameState),
) -> Result<usize, SolveError> {
    let mut seen = HashSet::new();
    seen.insert(state_key(spec, start));
    visit(start);
    let mut stack: Vec<(GameState, std::vec::IntoIter<Action>)> =
        vec![(start.clone(), spec.legal_actions(start).into_iter())];
    while let Some((state, actions)) = stack.last_mut() {
        match actions.next() {
            Some(a) => {
                let child = spec.apply(state, a).expect("legal action");
                if seen.insert(state_key(spec, &child)) {
                    if seen.len() > cap {
                        return Err(SolveError::StateSpaceTooLarge {
                            game: spec.id(),
                            cap,
                        });
                    }
                    visit(&child);
                    let next = spec.legal_actions(&child).into_iter();
                    stack.push((child, next));
                }
            }
            None => {
                stack.pop();
            }
        }
    }
    Ok(seen.len())
}

/// Exact game values by memoized depth-first search, computed lazily on demand.
///
/// Values are from the perspective of the player to move: +1 win, 0 draw, -1 loss.
#[derive(Clone, Debug)]
pub struct Solver {
    spec: GameSpec,
    memo: HashMap<StateKey, (i8, u32)>,
}

impl Solver {
    pub fn new(spec: GameSpec) -> Self {
        Solver {
            spec,
            memo: HashMap::new(),
        }
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn solved_count(&self) -> usize {
        self.memo.len()
    }

    pub fn value(&mut self, state: &GameState) -> i8 {
        self.solve(state).0
    }

    /// Value and plies to the end under optimal play: winners hurry, losers stall.
    pub fn solve(&mut self, state: &GameState) -> (i8, u32) {
        let key = state_key(&self.spec, state);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let result = if self.spec.is_terminal(state) {
            let o = self.spec.outcome_of(state).expect("terminal");
            (o.reward(state.to_move), 0)
        } else {
            let mut best: Option<(i8, u32)> = None;
            for a in self.spec.legal_actions(state) {
                let (v, d) = self.child(state, a);
                best = Some(match best {
                    None => (v, d),
                    Some((bv, _)) if v > bv => (v, d),
                    Some((bv, bd)) if v == bv => {
                        let d = if v > 0 { bd.min(d) } else { bd.max(d) };
                        (bv, d)
                    }
                    Some(b) => b,
                });
            }
            let (v, d) = best.expect("non-terminal states have moves");
            (v, d + 1)
        };
        self.memo.insert(key, result);
        result
    }

    /// Value of playing `a` in `state`, from the mover's perspective, and the child's depth.
    fn child(&mut self, state: &GameState, a: Action) -> (i8, u32) {
        let next = self.spec.apply(state, a).expect("legal action");
        let (v, d) = self.solve(&next);
        if next.to_move == state.to_move {
            (v, d)
        } else {
            (-v, d)
        }
    }

    /// Value of each legal action from the mover's perspective.
    pub fn action_values(&mut self, state: &GameState) -> Vec<(Action, i8)> {
        self.spec
            .legal_actions(state)
            .into_iter()
            .map(|a| (a, self.child(state, a).0))
            .collect()
    }

    /// All legal actions that attain the state's value.
    pub fn optimal_actions(&mut self, state: &GameState) -> Vec<Action> {
        let vals = self.action_values(state);
        let best = vals.iter().map(|&(_, v)| v).max();
        vals.into_iter()
            .filter(|&(_, v)| Some(v) == best)
            .map(|(a, _)| a)
            .collect()
    }

    /// Lowest-index optimal action.
    pub fn best_action(&mut self, state: &GameState) -> Option<Action> {
        self.optimal_actions(state).into_iter().next()
    }
}

/// Exact values for every reachable state, keyed by canonical key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolvedPositions {
    pub values: HashMap<String, i8>,
    pub depth_to_end: HashMap<String, u32>,
    pub root_value: i8,
}

pub fn solve_positions(spec: &GameSpec) -> Result<SolvedPositions, SolveError> {
    solve_positions_capped(spec, STATE_CAP)
}

pub fn solve_positions_capped(spec: &GameSpec, cap: usize) -> Result<SolvedPositions, SolveError> {
    let states = reachable_states(spec, &spec.initial(), cap)?;
    let mut solver = Solver::new(*spec);
    let mut out = SolvedPositions::default();
    for s in &states {
        let (v, d) = solver.solve(s);
        let key = spec.canonical_key(s);
        out.values.insert(key.clone(), v);
        out.depth_to_end.insert(key, d);
    }
    out.root_value = solver.value(&spec.initial());
    Ok(out)
}
