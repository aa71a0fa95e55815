//! `ddi`: batch front end for data-driven measurement inference.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "ddi", version, about = "Minimum-volume quasi-measurement inference on the ball")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Tolerance for normalization, purity and design checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Relative optimality gap for the ellipsoid solver.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub eps: f64,
    /// Iteration cap for the ellipsoid solver.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub max_iter: usize,
    /// Base seed; trial `i` of a campaign uses `seed + i`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output format (default: csv for `simulate`, json otherwise).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file, written atomically. Standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infer the minimum-volume quasi-measurement from a cloud of distributions.
    Infer { input: PathBuf },
    /// Check whether a weighted state set is a spherical 2-design.
    VerifyDesign { input: PathBuf },
    /// Embed density matrices into the real formalism.
    Embed {
        input: PathBuf,
        /// Hilbert-space dimension.
        #[arg(long)]
        d: usize,
    },
    /// Round-trip campaign over random informationally complete measurements.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Failure::invalid(format!("--tol must be positive, got {}", self.tol)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Failure::invalid(format!("--eps must be positive, got {}", self.eps)));
        }
        if self.max_iter == 0 {
            return Err(Failure::invalid("--max-iter must be at least 1"));
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DDI_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(commands::EXIT_INVALID);
        }
    };
    let outcome = cli.config.validate().and_then(|()| match &cli.command {
        Command::Infer { input } => commands::infer(input, &cli.config),
        Command::VerifyDesign { input } => commands::verify_design(input, &cli.config),
        Command::Embed { input, d } => commands::embed(input, *d, &cli.config),
        Command::Simulate { n, l, trials } => commands::simulate(*n, *l, *trials, &cli.config),
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("ddi: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
