//! `gamebot`: play, solve, train and serve.
//!
//! Exit codes: 0 success, 2 usage error, 3 runtime error.

mod cli;
mod commands;
mod play;
mod render;

use std::process::ExitCode;

use clap::Parser;

/// Errors in how the command was invoked rather than in what it did.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    let cli = match cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        cli::Command::Play(a) => commands::play(a),
        cli::Command::Solve(a) => commands::solve(a),
        cli::Command::Train(a) => commands::train(a),
        cli::Command::Loop(a) => commands::refine(a),
        cli::Command::Serve(a) => commands::serve(a),
        cli::Command::Curriculum(a) => commands::curriculum(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
