//! Library half of the command-line driver: argument types, command
//! implementations and the exit-code policy, kept callable from tests.
//!
//! Exit codes: 0 success (or report-only), 1 verification check failed,
//! 2 configuration/argument validation error, 3 numerical failure
//! (divergence, ill-conditioning, degenerate data), 4 I/O or data-file error.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "scatter1d",
    about = "1-D inverse medium scattering: simulation, reconstruction and verification"
)]
pub struct Cli {
    /// TOML config file; omitted means built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `[output].dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Noise seed override (overrides `[noise].seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the forward problem and write boundary data plus the spectrum.
    Simulate,
    /// Reconstruct the coefficient from measurement data (or re-simulated
    /// data when no --data file is given).
    Reconstruct {
        /// Measurement file in the external ingestion format.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Calibration multiplier for ingested data (overrides `[data]`).
        #[arg(long)]
        calibration: Option<f64>,
    },
    /// Run one of the inequality checks and write its JSON report.
    Verify {
        #[arg(value_enum)]
        kind: VerifyKind,
    },
    /// Simulate, reconstruct and compare against the known target; supports
    /// batches over target locations and contrasts.
    Pipeline {
        /// Comma-separated list of target centers (defaults to the config).
        #[arg(long, value_delimiter = ',')]
        targets: Vec<f64>,
        /// Comma-separated list of contrasts (defaults to the config).
        #[arg(long, value_delimiter = ',')]
        contrasts: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VerifyKind {
    Carleman,
    Convexity,
    Lipschitz,
    NoiseSweep,
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let mut config = match &cli.config {
        Some(path) => match config::ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_VALIDATION;
            }
        },
        None => config::ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.display().to_string();
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return EXIT_VALIDATION;
    }

    let result = match cli.command {
        Command::Simulate => commands::simulate(&config),
        Command::Reconstruct { data, calibration } => {
            commands::reconstruct(&config, data.as_deref(), calibration)
        }
        Command::Verify { kind } => commands::verify(&config, kind),
        Command::Pipeline { targets, contrasts } => {
            commands::pipeline(&config, &targets, &contrasts)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Map core errors onto the exit-code policy.
pub fn exit_code_for(error: &scatter1d::Error) -> i32 {
    use scatter1d::Error::*;
    match error {
        Diverged { .. }
        | IllConditioned { .. }
        | DegenerateData { .. }
        | AmbiguousMode
        | LambdaHypothesis(_)
        | NonPositiveWavenumber(_) => EXIT_NUMERICAL,
        Parse { .. } | Coverage { .. } | Io(_) => EXIT_IO,
    }
}
