use super::solver::Solver;
use crate::agent::{Agent, TurnContext};
use crate::game::{Action, GameSpec, GameState, PlayerId, Position};

/// Optimal take for single-pile misère Nim. Losing piles (`r ≡ 1 mod K+1`) take one stone.
pub fn nim_optimal_move(r: u32, k: u32) -> u32 {
    let t = (r.saturating_sub(1)) % (k + 1);
    if t == 0 {
        1
    } else {
        t
    }
}

/// Whether the mover wins single-pile misère Nim from `r` stones.
pub fn nim_is_winning(r: u32, k: u32) -> bool {
    r % (k + 1) != 1
}

/// Bitwise XOR of all piles.
pub fn nim_sum(piles: &[u64]) -> u64 {
    piles.iter().fold(0, |acc, &p| acc ^ p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EuclidMove {
    Win(u64),
    LosingPosition,
}

/// Whether the mover wins the Game of Euclid from `(a, b)`, `a >= b >= 1`.
pub fn euclid_is_winning(a: u64, b: u64) -> bool {
    let (mut a, mut b) = (a.max(b), a.min(b));
    let mut mover_wins = true;
    loop {
        if b == 0 {
            // Reached only if the caller passed a zero pile: the previous mover won.
            return !mover_wins;
        }
        if a % b == 0 || a >= 2 * b {
            return mover_wins;
        }
        // Only move is m = 1, to (b, a - b).
        (a, b) = (b, a - b);
        mover_wins = !mover_wins;
    }
}

/// Smallest multiplier leaving the opponent in a losing position.
pub fn euclid_optimal_move(a: u64, b: u64) -> EuclidMove {
    let (a, b) = (a.max(b), a.min(b));
    let (q, r) = (a / b, a % b);
    if r == 0 {
        return EuclidMove::Win(q);
    }
    // Moves m < q - 1 leave a pile at least twice the other, which wins for the opponent.
    if q >= 2 && !euclid_is_winning(r + b, b) {
        return EuclidMove::Win(q - 1);
    }
    if !euclid_is_winning(b, r) {
        return EuclidMove::Win(q);
    }
    EuclidMove::LosingPosition
}

/// Closed-form player for Nim and Euclid.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactAgent;

impl ExactAgent {
    pub fn choose(state: &GameState) -> Option<Action> {
        match &state.payload {
            Position::Nim(p) if p.remaining > 0 => Some(nim_optimal_move(p.remaining, p.max_take)),
            Position::Euclid(p) if p.b > 0 => Some(match euclid_optimal_move(p.a, p.b) {
                EuclidMove::Win(m) => m.min(Action::MAX as u64) as Action,
                EuclidMove::LosingPosition => 1,
            }),
            _ => None,
        }
    }

    pub fn explain(state: &GameState) -> Option<String> {
        match &state.payload {
            Position::Nim(p) if p.remaining > 0 => {
                let m = p.max_take + 1;
                Some(if nim_is_winning(p.remaining, p.max_take) {
                    let t = nim_optimal_move(p.remaining, p.max_take);
                    format!(
                        "{} mod {m} = {}; taking {t} leaves {} which is 1 mod {m}, a losing pile for the opponent.",
                        p.remaining,
                        p.remaining % m,
                        p.remaining - t
                    )
                } else {
                    format!(
                        "{} mod {m} = 1, a losing pile; taking 1 to prolong the game.",
                        p.remaining
                    )
                })
            }
            Position::Euclid(p) if p.b > 0 => Some(match euclid_optimal_move(p.a, p.b) {
                EuclidMove::Win(m) => format!(
                    "Removing {m} x {} from {} leaves the opponent a losing position.",
                    p.b, p.a
                ),
                EuclidMove::LosingPosition => {
                    format!(
                        "({}, {}) is lost against best play; removing one multiple.",
                        p.a, p.b
                    )
                }
            }),
            _ => None,
        }
    }
}

impl Agent for ExactAgent {
    fn descriptor(&self) -> String {
        "exact".into()
    }

    fn select(&mut self, spec: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action {
        Self::choose(state).unwrap_or_else(|| OracleAgent::new(*spec).select(spec, state, ctx))
    }
}

/// The starter heuristic `n_AI = max(r, 3 - n_user)` for Nim, clamped into the legal range.
/// `n_user` is the opponent's previous take, or 0 before the opponent has moved.
pub fn h0_take(r: u32, k: u32, n_user: Option<u32>) -> u32 {
    let n_user = n_user.unwrap_or(0);
    let raw = r.max(3u32.saturating_sub(n_user));
    raw.clamp(1, k.min(r).max(1))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct H0Agent;

impl Agent for H0Agent {
    fn descriptor(&self) -> String {
        "heuristic:h0".into()
    }

    fn select(&mut self, _: &GameSpec, state: &GameState, ctx: &mut TurnContext<'_>) -> Action {
        match &state.payload {
            Position::Nim(p) => h0_take(
                p.remaining,
                p.max_take,
                ctx.last_move_by(state.to_move.opponent()),
            ),
            _ => Action::MAX,
        }
    }
}

/// Plays a lowest-index optimal move from a lazily filled exact solver.
#[derive(Clone, Debug)]
pub struct OracleAgent {
    solver: Solver,
}

impl OracleAgent {
    pub fn new(spec: GameSpec) -> Self {
        OracleAgent {
            solver: Solver::new(spec),
        }
    }
}

impl Agent for OracleAgent {
    fn descriptor(&self) -> String {
        "oracle".into()
    }

    fn select(&mut self, _: &GameSpec, state: &GameState, _: &mut TurnContext<'_>) -> Action {
        self.solver.best_action(state).unwrap_or(Action::MAX)
    }
}

/// Seat-independent helper for tests and dataset builders.
pub fn winning_seat(solver: &mut Solver, start: &GameState) -> Option<PlayerId> {
    match solver.value(start) {
        1 => Some(start.to_move),
        -1 => Some(start.to_move.opponent()),
        _ => None,
    }
}
