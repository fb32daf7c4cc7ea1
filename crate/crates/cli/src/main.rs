mod args;
mod commands;
mod error;
mod io;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = args::Cli::parse();
    let result = match &cli.command {
        args::Command::Estimate(a) => commands::estimate(a),
        args::Command::Simulate(a) => commands::simulate(a),
        args::Command::Curve(a) => commands::curve(a),
        args::Command::Coverage(a) => commands::coverage(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hyperu: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
