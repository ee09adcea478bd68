mod args;
mod commands;
mod config;
mod failure;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use commands::Context;
use config::RunConfig;
use failure::Failure;

fn run(cli: Cli) -> Result<serde_json::Value, Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = config.resolve_seed(cli.seed)?;
    let ctx = Context { config, seed };
    match &cli.command {
        Command::Sample(a) => commands::sample(&ctx, a),
        Command::Spectrum(a) => commands::spectrum(&ctx, a),
        Command::EllipticCheck(a) => commands::elliptic_check(&ctx, a),
        Command::SnTail(a) => commands::sn_tail(&ctx, a),
        Command::Logpot(a) => commands::logpot(&ctx, a),
        Command::Concentration(a) => commands::concentration(&ctx, a),
        Command::Geometry(a) => commands::geometry(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!();
            let _ = Cli::command().write_long_help(&mut std::io::stderr());
            return ExitCode::from(failure::USAGE);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
