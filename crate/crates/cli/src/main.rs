//! `motility`: resting-state stability, dispersion sweeps, traveling-wave
//! branches and the acceptance suite from a TOML configuration.
//!
//! ```text
//! motility --config run.toml dispersion
//! motility --config run.toml --set model.chi_u=1.5 --set analysis.v_max=0.2 branch
//! motility --config run.toml verify --only 1,2,9
//! ```
//!
//! Exit codes: 0 success, 1 failed verification or output error, 2 configuration
//! error, 3 solver failure, 4 partial results.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "motility", version, about = "Stability and traveling waves of a free-boundary cell motility model")]
struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set model.gamma=2.0`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory, overriding `output.directory`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resting disk, threshold chi_c* and stability verdict.
    RestingState,
    /// Roots of the dispersion function over the chi_c grid and mode range.
    Dispersion,
    /// Traveling-wave branch from the bifurcation point up to `analysis.v_max`.
    Branch,
    /// Boundary contour of the traveling wave at the given speed.
    Shape {
        #[arg(long)]
        velocity: Option<f64>,
    },
    /// Acceptance suite with a pass/fail table.
    Verify {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("no configuration file given (use --config)".into()))?;
    let mut cfg = RunConfig::load(&path, &cli.set)?;
    if let Some(dir) = cli.out {
        cfg.output.directory = dir;
    }
    match cli.command {
        Command::RestingState => commands::resting(&cfg),
        Command::Dispersion => commands::dispersion(&cfg),
        Command::Branch => commands::branch(&cfg),
        Command::Shape { velocity } => commands::shape(&cfg, velocity),
        Command::Verify { only } => commands::verify(&cfg, &only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
