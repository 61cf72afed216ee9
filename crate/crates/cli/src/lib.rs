//! `harq` command-line front end.
//!
//! Exit codes: 0 success, 1 a verification suite failed, 2 invalid arguments
//! or input, 3 a `--strict` allocation left the high-SNR region.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
mod commands;
pub mod config;
pub mod format;

pub use commands::sweep::{SweepRow, COLUMNS_PREFIX};

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_STRICT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] harq_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Runs one invocation and returns its exit code. Output goes to the two
/// writers so tests can run the CLI in-process.
pub fn run(argv: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };

    // commands write into buffers so they can run inside a worker pool
    let mut out_buf = Vec::new();
    let mut err_buf = Vec::new();
    let dispatch = |out: &mut Vec<u8>, err: &mut Vec<u8>| match &cli.command {
        Command::Allocate(a) => commands::allocate::run(a, out, err),
        Command::Sweep(a) => commands::sweep::run(a, out),
        Command::Simulate(a) => commands::simulate::run(a, out),
        Command::Verify(a) => commands::verify::run(a, out, err),
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| dispatch(&mut out_buf, &mut err_buf)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} workers: {e}"))),
        },
        None => dispatch(&mut out_buf, &mut err_buf),
    };
    let _ = out.write_all(&out_buf);
    let _ = err.write_all(&err_buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
