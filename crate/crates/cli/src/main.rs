mod args;
mod commands;
mod table;

use std::fmt;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use crate::args::{Cli, Command};
use crate::commands::Output;

/// Bad invocation rather than bad data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.into()).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_DATA);
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n");
            let _ = Cli::command().print_help();
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let out = Output { json: cli.json };
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Ingest(a) => commands::ingest(a, &out),
        Command::Categorize(a) => commands::categorize(a, &out),
        Command::Train(a) => commands::train(a, &out),
        Command::Validate(a) => commands::validate(a, &out),
        Command::Rank(a) => commands::rank(a, &out),
        Command::Compare(a) => commands::compare(a, &out),
        Command::Savings(a) => commands::savings(a, &out),
        Command::Lookup(a) => commands::lookup(a, &out),
        Command::Recommend(a) => commands::recommend(a, &out),
        Command::Serve(a) => commands::serve(a),
    }
}
