//! `msl`: dataset, detection and evaluation workflows.
//!
//! Human-readable output goes to stderr; JSON goes to stdout or files.
//! Exit codes: 0 ok, 1 error, 2 validation findings, 64 usage.

mod config;
mod dataset;
mod detect;
mod eval;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::FileConfig;

pub const EXIT_FINDINGS: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "msl", version, about = "Static sign detection: dataset tooling, inference and evaluation")]
struct Cli {
    /// TOML file with defaults (model, metadata, conf, iou, max_det, workers, seed, input_size).
    #[arg(long, global = true, env = "MSL_CONFIG")]
    config: Option<PathBuf>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Only errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build, augment, split, inspect and validate YOLO datasets.
    #[command(subcommand)]
    Dataset(dataset::DatasetCommand),
    /// Run detection over an image, a directory of frames or a stream of frame paths.
    Detect(detect::DetectArgs),
    /// Score JSON-lines predictions against a dataset split.
    Eval(eval::EvalArgs),
}

/// What a successful command found.
pub enum Outcome {
    Clean,
    Findings,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArg {
    /// RNG seed; fixed seeds give byte-identical outputs.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SeedArg {
    pub fn resolve(&self, cfg: &FileConfig) -> u64 {
        self.seed.or(cfg.seed).unwrap_or(42)
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("MSL_LOG")
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Dataset(cmd) => dataset::run(cmd, &cfg),
        Command::Detect(args) => detect::run(args, &cfg),
        Command::Eval(args) => eval::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Findings) => ExitCode::from(EXIT_FINDINGS),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
