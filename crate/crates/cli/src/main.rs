//! `fadecode`: train, evaluate, analyze, and reproduce learned fading-channel
//! codes. CSV outputs are the stable interface; plots are a convenience.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 runtime failure.

mod commands;
mod config;
mod plot;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<fadecode::Error> for CliError {
    fn from(e: fadecode::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "fadecode", version, about = "Learned short block codes for fading channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// TOML experiment config
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $FADECODE_OUT, then ./fadecode-out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an autoencoder; writes the model, its metadata, and the loss trace
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep a baseline or a trained model over an SNR grid; writes a BLER CSV
    Eval {
        /// Baseline name or model file
        target: Option<String>,
        #[command(flatten)]
        common: Common,
        /// Monte Carlo trials per SNR point
        #[arg(long)]
        trials: Option<u64>,
        /// SNR grid as lo:hi:count (dB)
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Fading law for baselines and transfer evaluation
        #[arg(long)]
        fading: Option<String>,
        /// Evaluate an AWGN-trained model on fading with receiver CSI
        #[arg(long)]
        transfer: bool,
    },
    /// Print a model's codebook and orthogonality report
    Analyze {
        /// Model file
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate a table or figure: table1, table2, table3, fig1, fig2, fig3, fig4
    Reproduce {
        target: Option<String>,
        #[command(flatten)]
        common: Common,
        /// Monte Carlo trials per SNR point for every curve
        #[arg(long)]
        trials: Option<u64>,
        /// Training steps for every learned system
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common } => commands::train(&common),
        Command::Eval { target, common, trials, grid, fading, transfer } => commands::eval(
            &common,
            commands::EvalArgs { target, trials, grid, fading, transfer },
        ),
        Command::Analyze { model, common } => commands::analyze(&common, model),
        Command::Reproduce { target, common, trials, steps } => {
            reproduce::run(&common, target, trials, steps)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
