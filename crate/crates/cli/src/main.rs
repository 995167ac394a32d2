//! `trialink`: ingest corpora, build indexes, rank candidates, evaluate
//! against a benchmark and serve screening sessions.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{GlobalArgs, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "trialink",
    version,
    about = "Rank bibliographic articles for trial registrations"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter raw corpora into canonical files and extract reported links.
    Ingest,
    /// Build and persist inverted indexes.
    Index(commands::IndexArgs),
    /// Rank candidate articles for one or more registrations.
    Rank(commands::RankArgs),
    /// Score configurations against a benchmark of known links.
    Evaluate(commands::EvaluateArgs),
    /// Feature occurrence histograms for both corpora.
    Stats,
    /// Run the HTTP screening service.
    Serve(commands::ServeArgs),
    /// Generate a synthetic corpus with planted links.
    Synth(commands::SynthArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(&cli.global)?;
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Index(args) => commands::index(&cfg, args),
        Command::Rank(args) => commands::rank(&cfg, args),
        Command::Evaluate(args) => commands::evaluate(&cfg, args),
        Command::Stats => commands::stats(&cfg),
        Command::Serve(args) => commands::serve(&cfg, args),
        Command::Synth(args) => commands::synth(&cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("TRIALINK_LOG")
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
