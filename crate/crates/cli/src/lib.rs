//! Command line front end: configuration parsing, subcommand dispatch and
//! reproducible artifact output.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{env_seed, parse_config, RunConfig};
use crate::output::{write_outputs, Format, Report, RunInfo};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] regfbm_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) | CliError::Core(_) => EXIT_RUNTIME,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(_) => "runtime",
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "regfbm",
    version,
    about = "Rare-event simulation of fluid queues fed by fractional Brownian motion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed; overrides REGFBM_SEED and the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Limit constants and window geometry for every level.
    Constants,
    /// Conditioned sample summaries and a few workload paths.
    Sample,
    /// Crude Monte Carlo tail probabilities with n_target proposals per level.
    Tail,
    /// Scaled overshoot against its exponential limit.
    VerifyOvershoot,
    /// Log-log regression of the median sojourn above the level.
    VerifyClump,
    /// Concentration of the passage time around t*.
    VerifyHitting,
    /// Conditional covariance, closed-form conditional means, mean path.
    VerifyConditioning,
    /// Samples of the conditional limit process.
    LimitProcess,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Sample => "sample",
            Command::Tail => "tail",
            Command::VerifyOvershoot => "verify-overshoot",
            Command::VerifyClump => "verify-clump",
            Command::VerifyHitting => "verify-hitting",
            Command::VerifyConditioning => "verify-conditioning",
            Command::LimitProcess => "limit-process",
        }
    }

    pub fn execute(self, cfg: &RunConfig) -> Result<Report, CliError> {
        let report = match self {
            Command::Constants => commands::constants(cfg),
            Command::Sample => commands::sample(cfg),
            Command::Tail => commands::tail(cfg),
            Command::VerifyOvershoot => commands::verify_overshoot(cfg),
            Command::VerifyClump => commands::verify_clump(cfg),
            Command::VerifyHitting => commands::verify_hitting(cfg),
            Command::VerifyConditioning => commands::verify_conditioning(cfg),
            Command::LimitProcess => commands::limit_process(cfg),
        }?;
        Ok(report)
    }
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match run_cli(&cli) {
        Ok(manifest) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&manifest).unwrap_or_default()
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Resolves the configuration, executes the subcommand and writes its
/// artifacts, returning the manifest.
pub fn run_cli(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <file> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => env_seed()?,
    };
    let cfg = parse_config(&text, seed)?;
    let start = Instant::now();
    let report = cli.command.execute(&cfg)?;
    let info = RunInfo {
        subcommand: cli.command.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    write_outputs(&cli.out_dir, &report, cli.format, &info)
}
