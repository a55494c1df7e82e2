use std::process::ExitCode;

use clap::Parser;
use h2s_cli::commands::{run, Cli};
use tracing::Level;

fn log_level() -> Level {
    std::env::var("H2S_LOG")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(Level::WARN)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(log_level())
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
