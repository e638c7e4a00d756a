mod args;
mod config;
mod pipeline;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::{AdaptChoice, RunConfig, UsageError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::from_cli(&cli)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synth => pipeline::synth(&cfg),
        Command::TrainFeatnet => pipeline::train_featnet(&cfg),
        Command::ExtractFeatures => pipeline::extract_features(&cfg),
        Command::TrainAm => pipeline::train_am(&cfg),
        Command::Decode => pipeline::decode(&cfg, AdaptChoice::None),
        Command::Adapt => {
            if cfg.adapt == AdaptChoice::None {
                return Err(UsageError("adapt requires --adapt fmllr or --adapt map".into()).into());
            }
            pipeline::decode(&cfg, cfg.adapt)
        }
        Command::Score => pipeline::score(&cfg),
        Command::Analyze => pipeline::analyze(&cfg),
        Command::Report { .. } => pipeline::report(&cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<ssi_core::Error>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
