//! `hetesn` command-line tool. Logs go to standard error; results go to
//! files and a one-line summary on standard output.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or input, 1 for
//! runtime failures.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.global.log_level.filter()).format_timestamp(None).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs.max(1)).build_global() {
        log::warn!("could not size the worker pool: {e}");
    }
    match commands::run(&cli.global, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
