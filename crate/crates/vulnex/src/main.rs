use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;
use vulnex::cli::{Cli, Command};
use vulnex::commands::{self, EXIT_FAILURE};

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("VULNEX_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match &cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Report(args) => commands::report(args),
        Command::Serve(args) => commands::serve(args),
        Command::Enrich(args) => commands::enrich(args),
        Command::Convert(args) => commands::convert(args),
    };
    ExitCode::from(code)
}
