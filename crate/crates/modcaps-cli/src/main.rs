//! Command-line front end over the classification pipeline: dataset
//! generation and augmentation, training, evaluation, and the shift and
//! mixture experiments. Every run takes its settings from explicit flags,
//! falling back to a `--config` key-value file, then to defaults, and
//! writes a resolved snapshot of all of them into the output directory so
//! the run can be replayed from its own artifacts.
//!
//! Exit statuses: 0 success, 1 runtime failure, 2 usage or validation
//! error.

mod commands;
mod config;
mod profile;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Usage errors (bad flags, bad inputs, failed validation) exit 2;
/// runtime errors (i/o mid-run, diverged training) exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

#[derive(Parser)]
#[command(
    name = "modcaps",
    version,
    about = "Modulation classification from raw I/Q: datasets, training, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic I/Q dataset from an envelope profile.
    Generate(commands::GenerateArgs),
    /// Re-noise an existing dataset down to a target SNR range.
    Augment(commands::AugmentArgs),
    /// Train a classifier on a dataset and keep the best checkpoint.
    Train(commands::TrainArgs),
    /// Score a checkpoint: confusion matrix and accuracy-vs-SNR curve.
    Eval(commands::EvalArgs),
    /// Train under one envelope, test under a shifted one, report the gap.
    Shift(commands::ShiftArgs),
    /// Merge datasets, then train and evaluate on the mixture.
    Mix(commands::MixArgs),
    /// Describe a dataset directory or a checkpoint file.
    Inspect(commands::InspectArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::cmd_generate(args),
        Command::Augment(args) => commands::cmd_augment(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Shift(args) => commands::cmd_shift(args),
        Command::Mix(args) => commands::cmd_mix(args),
        Command::Inspect(args) => commands::cmd_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
