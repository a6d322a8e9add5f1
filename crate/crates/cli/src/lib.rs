//! Experiment runner for Linear Memory Networks.
//!
//! Every command reads a JSON config (`--config`), applies `--set key=value`
//! overrides, writes its outputs and a `manifest.json` into `--out`, and
//! maps failures to exit codes: 2 for configuration and input errors, 3 for
//! numeric failures, 1 for anything else.

pub mod commands;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::{eval, fit_ae, pretrain, sweep, train};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] lmn_core::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(lmn_core::Error::Io(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Write { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lmn", version, about = "Linear Memory Network experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep memory sizes of the closed-form sequence autoencoder.
    FitAe(CommonArgs),
    /// Train an RNN, LMN or unfolded network from random weights.
    Train(CommonArgs),
    /// Unfolded network → autoencoder → LMN, optionally fine-tuned.
    Pretrain(CommonArgs),
    /// Frame accuracy of a checkpoint on every split.
    Eval(CommonArgs),
    /// Validation accuracy over a grid of sizes and L2 weights.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set train.learning_rate=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "lmn-out")]
    pub out: PathBuf,
    /// Seed for initialization and shuffling; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FitAe(_) => "fit-ae",
            Command::Train(_) => "train",
            Command::Pretrain(_) => "pretrain",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::FitAe(a) | Command::Train(a) | Command::Pretrain(a) | Command::Eval(a) | Command::Sweep(a) => a,
        }
    }
}

/// Runs one command end to end, including the manifest.
pub fn execute(command: &Command) -> Result<(), CliError> {
    let args = command.args();
    let mut raw = config::load_raw(args.config.as_deref(), &args.set)?;
    if let Some(seed) = args.seed {
        config::apply_override(&mut raw, &format!("seed={seed}"))?;
    }
    fs::create_dir_all(&args.out).map_err(|source| CliError::Write {
        path: args.out.clone(),
        source,
    })?;
    let out = args.out.as_path();
    let (effective, seed, outputs) = match command {
        Command::FitAe(_) => {
            let cfg: config::FitAeConfig = config::parse(raw)?;
            (to_value(&cfg), cfg.seed, fit_ae(&cfg, out)?)
        }
        Command::Train(_) => {
            let mut cfg: config::TrainCmdConfig = config::parse(raw)?;
            if let Some(seed) = args.seed {
                cfg.train.seed = seed;
            }
            (to_value(&cfg), cfg.seed, train(&cfg, out)?)
        }
        Command::Pretrain(_) => {
            let mut cfg: config::PretrainCmdConfig = config::parse(raw)?;
            if let Some(seed) = args.seed {
                cfg.pretrain.seed = seed;
                cfg.pretrain.unfolded_train.seed = seed;
                if let Some(ft) = &mut cfg.fine_tune {
                    ft.seed = seed;
                }
            }
            (to_value(&cfg), cfg.seed, pretrain(&cfg, out)?)
        }
        Command::Eval(_) => {
            let cfg: config::EvalConfig = config::parse(raw)?;
            (to_value(&cfg), cfg.seed, eval(&cfg, out)?)
        }
        Command::Sweep(_) => {
            let mut cfg: config::SweepConfig = config::parse(raw)?;
            if let Some(seed) = args.seed {
                cfg.train.seed = seed;
            }
            (to_value(&cfg), cfg.seed, sweep(&cfg, out)?)
        }
    };
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        format_version: lmn_core::model::FORMAT_VERSION,
        seed,
        config: effective,
        outputs,
    };
    write_json(out, "manifest.json", &manifest)?;
    Ok(())
}

/// Parses `argv`, runs the command and converts the result to an exit code.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmn {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    format_version: u32,
    seed: u64,
    config: serde_json::Value,
    outputs: Vec<String>,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialize to JSON")
}

pub(crate) fn write_text(dir: &Path, name: &str, content: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| CliError::Write { path, source })?;
    Ok(name.to_string())
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String, CliError> {
    let text = serde_json::to_string_pretty(value).map_err(lmn_core::Error::from)?;
    write_text(dir, name, &text)
}
