//! Command-line entry point.

mod config;
mod run;

pub use config::{
    config_hash, parse_config, parse_config_str, BenchSection, CompareSection, EvalSection,
    GenDataSection, ModelEntry, SweepSection, WorkbenchConfig,
};
pub use run::{atomic_write, run_command, Command, RunContext, RunManifest};

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Runtime(_) => "runtime",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nbf", version, about = "Neural Bloom Filter workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    /// Path to the JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config's).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to $NBF_BENCH_OUT or ./nbf_out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dotted-path config overrides, e.g. --set train.max_steps=100.
    #[arg(long = "set", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads for internal parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CliCommand {
    /// Meta-train a model; writes checkpoint.nbf and train_log.csv.
    Train,
    /// Calibrate and measure a model; writes space_report.json.
    Eval,
    /// Hyper-parameter sweep; writes sweep_results.csv and best_config.json.
    Sweep,
    /// Timing benchmark; writes timing.csv.
    Bench,
    /// Space-versus-set-size comparison; writes space_curve.csv.
    Compare,
    /// Generate or ingest a dataset; writes dataset_manifest.json.
    GenData,
}

impl From<CliCommand> for Command {
    fn from(value: CliCommand) -> Self {
        match value {
            CliCommand::Train => Command::Train,
            CliCommand::Eval => Command::Eval,
            CliCommand::Sweep => Command::Sweep,
            CliCommand::Bench => Command::Bench,
            CliCommand::Compare => Command::Compare,
            CliCommand::GenData => Command::GenData,
        }
    }
}

fn execute(cli: Cli) -> Result<PathBuf, (PathBuf, CliError)> {
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("NBF_BENCH_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nbf_out"));
    let config_path = cli.config.clone().ok_or_else(|| {
        (
            out_dir.clone(),
            CliError::Config("--config <path> is required".to_string()),
        )
    })?;
    let (config, hash) = parse_config(&config_path, &cli.overrides, cli.seed)
        .map_err(|e| (out_dir.clone(), e))?;
    let ctx = RunContext {
        out_dir: out_dir.clone(),
        workers: cli.workers.max(1),
    };
    run_command(cli.command.into(), &config, &hash, &ctx)
        .map_err(|e| (out_dir.clone(), e))?;
    Ok(out_dir)
}

/// Run the CLI; returns the process exit code. Failures emit a
/// machine-readable error JSON on stderr and into the output directory.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(_) => 0,
        Err((out_dir, error)) => {
            let payload = serde_json::json!({
                "error": { "kind": error.kind(), "message": error.to_string() }
            });
            eprintln!("{payload}");
            let _ = std::fs::create_dir_all(&out_dir);
            let _ = std::fs::write(
                out_dir.join("error.json"),
                format!("{payload}\n"),
            );
            error.exit_code()
        }
    }
}
