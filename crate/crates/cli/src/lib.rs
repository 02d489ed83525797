//! The `cabm` command line: argument handling, config resolution and the
//! subcommands, exposed as [`run`] so the binary stays a one-liner.
//!
//! Exit codes: `0` when every requested check passes, `1` when a check
//! fails, `2` for usage errors and invalid inputs.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;

use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command, Format};
pub use config::{resolve, RunConfig, SEED_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] cabm::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parse `argv` (including the program name), run the subcommand and return
/// the exit code. Results go to `out` unless `--output` names a file.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_PASS
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = resolve(&cli.command, std::env::var(SEED_ENV).ok())
        .and_then(|rc| commands::execute(&cli.command, rc, out));
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
