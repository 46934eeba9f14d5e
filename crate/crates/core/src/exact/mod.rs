//! Dictionary tables, closed-form solvers and the brute-force oracle.

mod dictionary;
mod formulas;
mod solver;

pub use dictionary::{build_dictionary, DictionaryAgent, DictionaryError, DictionaryTable};
pub use formulas::{
    euclid_is_winning, euclid_optimal_move, h0_take, nim_is_winning, nim_optimal_move, nim_sum,
    winning_seat, EuclidMove, ExactAgent, H0Agent, OracleAgent,
};
pub use solver::{
    count_reachable, reachable_states, solve_positions, solve_positions_capped, SolveError,
    SolvedPositions, Solver, STATE_CAP,
};
