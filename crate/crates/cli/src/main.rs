//! `dpcipi` command-line interface.
//!
//! Exit codes: 0 success, 1 internal error, 2 input error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpcipi::models::ModelKind;
use dpcipi::synthetic::SyntheticConfig;

use config::Overrides;

#[derive(Parser)]
#[command(name = "dpcipi", version, about = "Cross-immunity prediction from paired influenza gene sequences")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align, deduplicate and split the HI dataset into pair files.
    Preprocess,
    /// Train a model on the training pairs.
    Train {
        #[arg(long, default_value = "dpcipi")]
        model: ModelKind,
    },
    /// Evaluate a trained model on the test pairs.
    Evaluate {
        #[arg(long, default_value = "dpcipi")]
        model: ModelKind,
    },
    /// Train and evaluate the initialization x operator grid.
    Ablate,
    /// Print class probabilities for one strain pair.
    Predict {
        #[arg(long, default_value = "dpcipi")]
        model: ModelKind,
        /// Reference strain: a nucleotide string or a FASTA file.
        reference: String,
        /// Test strain: a nucleotide string or a FASTA file.
        test: String,
    },
    /// Write a synthetic FASTA + HI table whose labels follow pair distance.
    GenerateSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        pairs: usize,
        #[arg(long, default_value_t = 17)]
        synthetic_seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::GenerateSynthetic {
        out,
        pairs,
        synthetic_seed,
    } = &cli.command
    {
        let synth = SyntheticConfig {
            pairs: *pairs,
            seed: *synthetic_seed,
            ..Default::default()
        };
        return commands::generate_synthetic(out, &synth);
    }
    let cfg = config::resolve(&cli.overrides)?;
    match cli.command {
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Train { model } => commands::train(&cfg, model),
        Command::Evaluate { model } => commands::evaluate_cmd(&cfg, model),
        Command::Ablate => commands::ablate(&cfg),
        Command::Predict { model, reference, test } => commands::predict(&cfg, model, &reference, &test),
        Command::GenerateSynthetic { .. } => unreachable!(),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<dpcipi::Error>()) {
        Some(e) if e.is_input_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
