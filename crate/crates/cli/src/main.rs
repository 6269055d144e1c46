use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] hybridjump::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
            CliError::ChecksFailed(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hybridjump", version, about = "Monte Carlo experiments for jump SDEs with state-dependent intensity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate paths of a built-in model and dump them as JSONL.
    Simulate,
    /// Weak error of a sweep of models against a reference model.
    WeakError,
    /// Weak error of the three-regime example against its limit.
    ThreeRegimes,
    /// Weak error of a hybrid Boltzmann particle scheme against the cutoff dynamics.
    Boltzmann,
    /// Regularity constants and the localization bound of a model.
    Constants,
    /// Run the invariant suite on the reference models.
    Validate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYBRIDJUMP_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cli.common),
        Command::WeakError => commands::weak_error(&cli.common),
        Command::ThreeRegimes => commands::three_regimes(&cli.common),
        Command::Boltzmann => commands::boltzmann(&cli.common),
        Command::Constants => commands::constants(&cli.common),
        Command::Validate => commands::validate(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hybridjump: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
