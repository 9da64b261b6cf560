//! Batch front-end: read a config, run one computation, write its artifacts and print a report.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 capacity exceeded,
//! 4 gamma below the threshold of the command.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use cantor_spectral::bratteli::DEFAULT_PATH_CAP;
use cantor_spectral::Error;
use clap::{Parser, Subcommand};
use thiserror::Error as ThisError;

use crate::commands::{Context, Output};
use crate::config::{sha256_hex, RunConfig};

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::CapacityExceeded { .. } => 3,
                Error::GammaTooSmall { .. } | Error::ThresholdViolation { .. } => 4,
                Error::NotSquare { .. }
                | Error::ZeroLine { .. }
                | Error::NotPrimitive { .. }
                | Error::DegenerateCylinder
                | Error::InvalidPath(_)
                | Error::InvalidPotential(_)
                | Error::LengthMismatch { .. }
                | Error::LevelExceedsTable { .. }
                | Error::ExactUnsupported(_) => 2,
                _ => 1,
            },
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cantor-spectral", version, about = "Spectral analysis on Bratteli path spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config, or JSON when the name ends in `.json`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the artifacts; created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Rational arithmetic (spectrum and weyl, zero potential, integer gamma).
    #[arg(long, global = true)]
    exact: bool,
    /// Worker threads for the parallel parts; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest number of paths held at one level.
    #[arg(long, global = true, default_value_t = DEFAULT_PATH_CAP)]
    cap: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Eigenvalues with multiplicities up to the configured level.
    Spectrum,
    /// Counting function and fitted growth exponent.
    Weyl,
    /// Heat-kernel samples and the two-sided estimate fit.
    Heat,
    /// Trace space, its eigenstructure and class vectors.
    Cohomology,
    /// Harmonic representative of a class and its convergence in the level.
    Hodge,
    /// Pressure, entropy, relative dimension and block masses.
    Gibbs,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Weyl => "weyl",
            Command::Heat => "heat",
            Command::Cohomology => "cohomology",
            Command::Hodge => "hodge",
            Command::Gibbs => "gibbs",
        }
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = RunConfig::parse(&text, path)?;
    let ctx = Context::new(cfg, sha256_hex(&bytes), cli.exact, cli.cap)?;
    let Output { files, report } = match cli.command {
        Command::Spectrum => commands::spectrum(&ctx)?,
        Command::Weyl => commands::weyl(&ctx)?,
        Command::Heat => commands::heat(&ctx)?,
        Command::Cohomology => commands::cohomology(&ctx)?,
        Command::Hodge => commands::hodge(&ctx)?,
        Command::Gibbs => commands::gibbs(&ctx)?,
    };
    let mut report = report;
    for w in &ctx.gibbs.warnings {
        report.push_str(&format!("warning: {w}\n"));
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Io { path: cli.out.clone(), source: e })?;
    let report_name = format!("{}_report.txt", cli.command.name());
    for (name, contents) in files.iter().chain(std::iter::once(&(report_name, report.clone()))) {
        let p = cli.out.join(name);
        std::fs::write(&p, contents).map_err(|e| CliError::Io { path: p, source: e })?;
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
