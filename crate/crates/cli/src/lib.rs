//! Command-line front end: registration, benchmark generation and sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;

use clap::Parser;

pub use error::{CliError, CliResult};

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match cli::Cli::try_parse_from(args) {
        Ok(p) => p,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match parsed.command {
        cli::Command::Register(a) => commands::register(a),
        cli::Command::Genbench(a) => commands::genbench(a),
        cli::Command::Bench(a) => commands::bench(a),
        cli::Command::Gradcheck(a) => commands::gradcheck(a),
        cli::Command::LinesDebug(a) => commands::lines_debug(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("raylign: {e}");
            e.exit_code()
        }
    }
}
