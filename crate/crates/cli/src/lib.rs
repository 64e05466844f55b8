//! Command-line surface of soficlab: subcommands binding single library
//! operations, and TOML pipelines with gated verification.

pub mod commands;
pub mod error;
pub mod files;
pub mod pipeline;
pub mod reports;

use clap::Parser;

pub use error::{CliError, CliResult};

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match commands::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("soficlab: {e}");
            e.exit_code()
        }
    }
}
