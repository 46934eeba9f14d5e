//! The four concrete games.

pub mod euclid;
pub mod mancala;
pub mod nim;
pub mod tictactoe;

pub use euclid::Piles;
pub use mancala::Board as MancalaBoard;
pub use nim::Pile;
pub use tictactoe::{Board as TicTacToeBoard, Cell};
