//! Batch front end for the PAMA simulator.
//!
//! Each run command reads a TOML [`config::RunConfig`], writes one CSV
//! table to `--out` and a JSON sidecar next to it (same stem, `.json`)
//! holding the tool version, seed, effective configuration and its
//! SHA-256.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
//! 4 infeasible scenario or geometry, 5 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pama_core::Vec3;

mod commands;
pub mod config;
pub mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }
}

impl From<pama_core::Error> for CliError {
    fn from(e: pama_core::Error) -> Self {
        use pama_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::EmptySampleSet => CliError::Usage(msg),
            E::TooManyUsers { .. }
            | E::Infeasible(_)
            | E::Domain(_)
            | E::DegenerateGeometry(_)
            | E::DegeneratePolarization => CliError::Infeasible(msg),
            E::SingularChannel { .. } | E::Numerical(_) | E::ProjectionFailure { .. } => CliError::Numerical(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pama", version, about = "Polarization-aware movable antenna simulator")]
pub struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration; defaults apply to anything omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; the sidecar goes next to it with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `scenario.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `scenario.repetitions`.
    #[arg(long)]
    pub reps: Option<usize>,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z but got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
    }
    Ok(v.into())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Transmit antenna position x,y,z in meters.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub tx_pos: Vec3,
    /// Transmit antenna axis x,y,z.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub tx_dir: Vec3,
    /// Receive antenna position x,y,z in meters.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub rx_pos: Vec3,
    /// Receive antenna axis x,y,z.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub rx_dir: Vec3,
    /// TOML configuration for the medium parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the link gain and its intermediate angles and coefficients.
    Eval(EvalArgs),
    /// Channel power map over transmit-antenna orientations on the reference link.
    Scenario1(RunArgs),
    /// Channel power map over receive-antenna orientations on the reference link.
    Scenario2(RunArgs),
    /// Half-energy capture fractions for random transmit and receive orientations.
    Montecarlo(RunArgs),
    /// Optimize one scenario and write the convergence trace.
    Optimize(RunArgs),
    /// γ_total versus number of users for each configuration.
    SweepUsers(RunArgs),
    /// γ_total versus total transmit power for each configuration.
    SweepPower(RunArgs),
    /// γ_total versus rotation resolution after optimization.
    SweepGranularity(RunArgs),
    /// Convergence traces for each configuration.
    Convergence(RunArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Eval(a) => commands::eval(&a),
        Command::Scenario1(a) => commands::orientation_map(&a, "scenario1"),
        Command::Scenario2(a) => commands::orientation_map(&a, "scenario2"),
        Command::Montecarlo(a) => commands::montecarlo(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::SweepUsers(a) => commands::sweep(&a, "sweep-users"),
        Command::SweepPower(a) => commands::sweep(&a, "sweep-power"),
        Command::SweepGranularity(a) => commands::sweep(&a, "sweep-granularity"),
        Command::Convergence(a) => commands::convergence(&a),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
