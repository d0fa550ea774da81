//! Command-line pipeline around `vitd-core`.
//!
//! Every command takes `--config <file>`, optionally `--seed` and `--out`, and
//! appends one entry to `<out>/manifest.jsonl` on success.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use vitd_core::VoteMode;

pub use config::{ExperimentConfig, Overrides, SplitName};
pub use error::{CliError, CliResult};
pub use manifest::{RunManifest, sha256_hex};

#[derive(Debug, Parser)]
#[command(name = "vitd", version, about = "Violence-inciting text detection: reference models, ensembles and evaluation")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-split example counts, class distribution and longest text.
    Stats,
    /// Train reference models.
    Train {
        /// Only this model; all reference models by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Write predictions of trained reference models.
    Predict {
        #[arg(long)]
        model: Option<String>,
        /// Dev and test (when configured) by default.
        #[arg(long, value_enum)]
        split: Option<SplitName>,
    },
    /// Validate external prediction files and add them to the store.
    Import {
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum)]
        split: Option<SplitName>,
    },
    /// Combine member predictions by hard or weighted voting.
    Ensemble {
        #[arg(long, value_enum, default_value_t = SplitName::Dev)]
        split: SplitName,
        /// Defaults to the config's ensemble mode.
        #[arg(long)]
        mode: Option<VoteMode>,
        /// Weight file; `<out>/weights.json` by default.
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
    },
    /// Grid-search voting weights on the dev split.
    SearchWeights,
    /// Hard-vote score of every subset of members.
    Subsets {
        #[arg(long, value_enum, default_value_t = SplitName::Dev)]
        split: SplitName,
    },
    /// Score table with bootstrap intervals.
    Evaluate {
        #[arg(long, value_enum, default_value_t = SplitName::Dev)]
        split: SplitName,
        /// Score this predictions file instead of the configured members.
        #[arg(long, value_name = "PATH")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        resamples: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stats => "stats",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Import { .. } => "import",
            Command::Ensemble { .. } => "ensemble",
            Command::SearchWeights => "search-weights",
            Command::Subsets { .. } => "subsets",
            Command::Evaluate { .. } => "evaluate",
        }
    }
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: &Cli, args: Vec<String>, out: &mut dyn Write) -> CliResult<RunManifest> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::usage("--config <PATH> is required"))?;
    let overrides = Overrides { seed: cli.seed, output_dir: cli.out.clone() };
    let config = ExperimentConfig::load(config_path, &overrides)?;
    let config_bytes = std::fs::read(config_path).map_err(anyhow::Error::from)?;
    let manifest_path = config.manifest_path();
    let run = manifest::Run::start(cli.command.name(), args, config_path, &config_bytes, &config);
    let mut ctx = commands::Context { config, run, out };
    match &cli.command {
        Command::Stats => commands::stats(&mut ctx)?,
        Command::Train { model } => commands::train_models(&mut ctx, model.as_deref())?,
        Command::Predict { model, split } => commands::predict(&mut ctx, model.as_deref(), *split)?,
        Command::Import { model, split } => commands::import(&mut ctx, model.as_deref(), *split)?,
        Command::Ensemble { split, mode, weights } => {
            commands::ensemble(&mut ctx, *split, *mode, weights.as_deref())?
        }
        Command::SearchWeights => commands::search(&mut ctx)?,
        Command::Subsets { split } => commands::subsets(&mut ctx, *split)?,
        Command::Evaluate { split, predictions, resamples } => {
            commands::evaluate_split(&mut ctx, *split, predictions.as_deref(), *resamples)?
        }
    }
    Ok(ctx.run.finish(&manifest_path)?)
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, S>(args: I, out: &mut dyn Write) -> CliResult<RunManifest>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(|e| CliError::usage(e.to_string()))?;
    run(&cli, args, out)
}

/// Paths of every file under `dir`, relative and sorted.
pub fn list_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                found.push(path.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    found.sort();
    Ok(found)
}
