//! `qctrl`: simulate, certify and analyze controlled spin networks.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qctrl_core::par;

use crate::config::{Config, Overrides, SolverKind, DEFAULT_NORM_TOL};
use crate::error::CliError;

/// Environment variable capping the worker pool size.
const THREADS_VAR: &str = "QCTRL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "qctrl",
    version,
    about = "Entanglement and controllability of coupled spin networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Solver for constant-control segments.
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverKind>,

    /// Series truncation order; for `compare`, the highest order studied.
    #[arg(long, global = true, value_name = "N")]
    order: Option<usize>,

    /// Oracle step size.
    #[arg(long, global = true, value_name = "X")]
    dt: Option<f64>,

    /// Normalization tolerance.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a control schedule and write the trajectory.
    Simulate,
    /// Certify controllability of the configured spin graph.
    Controllability,
    /// Print the bracket table and check it against the reference.
    Brackets,
    /// Compare series truncation orders against the exact solution.
    Compare,
    /// Report the promoting, demoting and neutral control families.
    OptimalControl {
        /// Larger Schmidt coefficient.
        #[arg(long)]
        lambda1: f64,
        /// Smaller Schmidt coefficient.
        #[arg(long)]
        lambda2: f64,
        /// Control budget `x1² + y1² + x2² + y2²`.
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
        /// Coupling strength `J`.
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            solver: self.solver,
            order: self.order,
            dt: self.dt,
            tol: self.tol,
        }
    }

    fn load_config(&self) -> Result<Config, CliError> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
        Ok(Config::load(path)?)
    }
}

fn apply_thread_cap() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            par::cap_threads(n);
            Ok(())
        }
        _ => Err(CliError::Usage(format!(
            "{THREADS_VAR} must be a positive integer, got `{value}`"
        ))),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    apply_thread_cap()?;
    let text = match &cli.command {
        Command::Simulate => {
            let config = cli.load_config()?;
            let exp = config.experiment(cli.overrides())?;
            commands::simulate(
                &exp,
                &commands::output_dir(cli.out.as_deref(), Some(&config)),
            )?
        }
        Command::Compare => {
            let config = cli.load_config()?;
            let exp = config.experiment(cli.overrides())?;
            commands::compare(
                &exp,
                &commands::output_dir(cli.out.as_deref(), Some(&config)),
            )?
        }
        Command::Controllability => {
            let config = cli.load_config()?;
            let out = cli.out.clone().or_else(|| config.raw().output_dir.clone());
            let (text, report) = commands::controllability(&config, out.as_deref())?;
            print!("{text}");
            if !report.verdict {
                return Err(CliError::NotControllable {
                    closure_dim: report.closure_dim,
                    full_dim: report.full_dim,
                });
            }
            return Ok(());
        }
        Command::Brackets => commands::brackets(cli.out.as_deref())?,
        Command::OptimalControl {
            lambda1,
            lambda2,
            budget,
            coupling,
        } => commands::optimal_control(
            *lambda1,
            *lambda2,
            *budget,
            *coupling,
            cli.tol.unwrap_or(DEFAULT_NORM_TOL),
            cli.out.as_deref().map(Path::new),
        )?,
    };
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
