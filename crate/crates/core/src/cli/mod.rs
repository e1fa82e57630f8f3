//! Command-line entry point: `generate`, `train`, `predict` and `evaluate`,
//! each driven by one TOML run config.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_evaluate, cmd_generate, cmd_predict, cmd_train, sibling, GenerateOutcome, Selector, METRIC_FILES,
};
pub use config::{config_hash, EvaluationConfig, Overrides, PathsConfig, Profile, RunConfig};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "ventcast", version, about = "Simulate a ventilated office, train a quantile forecaster, evaluate it")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run config; built-in defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for simulation, noise, initialisation and shuffling.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Model size profile.
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    /// Output path (file, or directory for `evaluate`); defaults to the `paths` section.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Override any config field, e.g. `--set training.max_epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig> {
        let o = Overrides { seed: self.seed, profile: self.profile, set: self.set.clone() };
        RunConfig::load(self.config.as_deref(), &o)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the building and write the dataset CSV with a manifest.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train on a dataset and write the best checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset CSV; defaults to `paths.dataset`.
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Forecast selected test instances and write the forecast dump.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint; defaults to `paths.checkpoint`.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Dataset CSV; defaults to `paths.dataset`.
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        /// `all-test` or `index:N` (N-th test window).
        #[arg(long, default_value = "all-test")]
        select: String,
    },
    /// Compute horizon CVRMSE, interval coverage and a summary from a forecast dump.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Forecast dump; defaults to `paths.forecasts`.
        #[arg(long, value_name = "PATH")]
        forecasts: Option<PathBuf>,
    },
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common } => {
            let cfg = common.load()?;
            let out = common.out.unwrap_or(cfg.paths.dataset.clone());
            let r = cmd_generate(&cfg, &out)?;
            eprintln!("wrote {} rows to {} ({})", r.rows, out.display(), r.manifest.display());
        }
        Command::Train { common, dataset } => {
            let cfg = common.load()?;
            let dataset = dataset.unwrap_or(cfg.paths.dataset.clone());
            let out = common.out.unwrap_or(cfg.paths.checkpoint.clone());
            let r = cmd_train(&cfg, &dataset, &out)?;
            eprintln!(
                "best epoch {} (validation loss {:.6e}), stopped by {}; checkpoint {}",
                r.best_epoch,
                r.best_val_loss,
                r.stop_reason.as_str(),
                out.display()
            );
        }
        Command::Predict { common, checkpoint, dataset, select } => {
            let selector: Selector = select.parse()?;
            let cfg = common.load()?;
            let checkpoint = checkpoint.unwrap_or(cfg.paths.checkpoint.clone());
            let dataset = dataset.unwrap_or(cfg.paths.dataset.clone());
            let out = common.out.unwrap_or(cfg.paths.forecasts.clone());
            let rows = cmd_predict(&cfg, &checkpoint, &dataset, &selector, &out)?;
            eprintln!("wrote {rows} forecast rows to {}", out.display());
        }
        Command::Evaluate { common, forecasts } => {
            let cfg = common.load()?;
            let dump = forecasts.unwrap_or(cfg.paths.forecasts.clone());
            let out = common.out.unwrap_or(cfg.paths.metrics_dir.clone());
            let files = cmd_evaluate(&cfg, &dump, &out)?;
            eprintln!("wrote {} metric files to {}", files.len(), out.display());
        }
    }
    Ok(())
}

/// Exit code: 0 on success, 2 for invalid input, 1 for runtime failures.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_validation() => 2,
        Err(_) => 1,
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = execute(cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}
