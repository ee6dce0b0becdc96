//! `wic`: prepare splits, train, predict, evaluate and analyze WiC models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wic_core::{ErrorClass, HeadConfig};

use crate::config::{ConfigError, Overrides};

#[derive(Parser)]
#[command(name = "wic", version, about = "Word-in-Context disambiguation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed for the split, parameter initialisation and batch order.
    #[arg(long)]
    seed: Option<u64>,
    /// Train on MCL-WiC train only and validate on MCL-WiC dev.
    #[arg(long)]
    no_extra_data: bool,
    /// Encoder registry name.
    #[arg(long)]
    encoder: Option<String>,
    /// One of mlp, mlp+cls, cosine-relu, cosine-sigmoid.
    #[arg(long, value_parser = parse_head)]
    head: Option<HeadConfig>,
    /// Output directory, overriding the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            no_extra_data: self.no_extra_data,
            encoder: self.encoder.clone(),
            head: self.head,
            output: self.output.clone(),
        }
    }
}

fn parse_head(s: &str) -> Result<HeadConfig, String> {
    s.parse().map_err(|e: wic_core::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Merge the configured corpora and write the lemma split manifest.
    Prepare(ExperimentArgs),
    /// Train a model and write its checkpoint directory.
    Train(ExperimentArgs),
    /// Score a corpus and write an MCL-WiC submission file.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// MCL-WiC data JSON or SuperGLUE JSON-lines file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Override the checkpoint's max_tokens.
        #[arg(long)]
        max_tokens: Option<usize>,
        /// Where to list pairs that could not be scored (default: next to the output).
        #[arg(long)]
        failures: Option<PathBuf>,
    },
    /// Score a submission against gold labels.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// MCL-WiC gold file; omit for labeled SuperGLUE JSON-lines data.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Also group errors by shared first sentence.
        #[arg(long)]
        analyze: bool,
    },
    /// Error analysis over one or more submissions.
    Analyze {
        #[arg(long, num_args = 1.., required = true)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a synthetic corpus as MCL-WiC train/dev/test files.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        label_noise: f64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Prepare(args) => commands::prepare(&args.config, &args.overrides()),
        Command::Train(args) => commands::train(&args.config, &args.overrides()),
        Command::Predict {
            checkpoint,
            data,
            output,
            max_tokens,
            failures,
        } => commands::predict(&checkpoint, &data, &output, max_tokens, failures.as_deref()),
        Command::Evaluate {
            predictions,
            data,
            gold,
            output,
            analyze,
        } => commands::evaluate(&predictions, &data, gold.as_deref(), &output, analyze),
        Command::Analyze {
            predictions,
            data,
            gold,
            output,
        } => commands::analyze(&predictions, &data, gold.as_deref(), &output),
        Command::Synth {
            output,
            pairs,
            seed,
            label_noise,
        } => commands::synth(&output, pairs, seed, label_noise),
    }
}

/// 1 for usage and config errors, 2 for data errors, 3 for runtime failures.
fn exit_code(error: &anyhow::Error) -> u8 {
    for cause in error.chain() {
        if let Some(e) = cause.downcast_ref::<wic_core::Error>() {
            return match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Runtime => 3,
            };
        }
        if cause.is::<ConfigError>() {
            return 1;
        }
        if cause.is::<commands::PartialFailure>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
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
