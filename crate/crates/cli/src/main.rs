//! `nrm`: generate instances, run the exact and approximate solvers, and
//! compare their bounds.

mod commands;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nrm_core::NrmError;

/// Exit statuses shared by every subcommand.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const TRUNCATED: u8 = 3;
    pub const SOLVER: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "nrm", version, about = "Network revenue management with ridge basis approximations")]
pub struct Cli {
    /// Worker threads for every parallel stage (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for all randomness: instance generation, searches and simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON file with algorithm settings; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// More progress output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated instance as JSON.
    Gen(GenArgs),
    /// Solve an instance exactly and print the optimal expected revenue.
    Exact(ExactArgs),
    /// Fit the affine approximation.
    Aa(AaArgs),
    /// Grow a ridge basis approximation.
    Run(RunArgs),
    /// Simulate the policy of a saved approximation.
    Simulate(SimulateArgs),
    /// Compare bounds from finished runs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Hub-and-spoke network with `--L` outer locations.
    #[arg(long, conflicts_with_all = ["bus_line", "toy"])]
    pub hub_spoke: bool,
    /// Line of consecutive legs with capacities from `--caps`.
    #[arg(long, conflicts_with = "toy")]
    pub bus_line: bool,
    /// The bundled two-leg example.
    #[arg(long)]
    pub toy: bool,

    #[arg(long = "L", value_name = "L")]
    pub locations: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    /// Capacity of every hub-and-spoke leg.
    #[arg(long)]
    pub c: Option<u32>,
    /// Comma-separated bus-line leg capacities.
    #[arg(long, value_delimiter = ',')]
    pub caps: Vec<u32>,
    /// Fare classes per bus-line itinerary.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long)]
    pub load_factor: Option<f64>,

    /// Output file (stdout when absent).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    /// Instance JSON file, or `toy2leg` for the bundled example.
    #[arg(long)]
    pub instance: String,
    /// Also write the full value table (binary) here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoName {
    H2pialg,
    Nlialg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeName {
    Standalone,
    Addon,
}

/// Settings shared by `aa` and `run`; each overrides the config file.
#[derive(Debug, Args, Default)]
pub struct TuneArgs {
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub max_wall: Option<f64>,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[arg(long)]
    pub omega_gap: Option<f64>,
    #[arg(long)]
    pub omega_policy: Option<f64>,
    #[arg(long)]
    pub omega_pgap: Option<f64>,
    #[arg(long)]
    pub sim_n_max: Option<usize>,
    /// Force exhaustive (`true`) or local (`false`) subproblem search.
    #[arg(long)]
    pub exact_subproblems: Option<bool>,
}

#[derive(Debug, Args)]
pub struct AaArgs {
    #[arg(long)]
    pub instance: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub tune: TuneArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value_t = AlgoName::H2pialg)]
    pub algo: AlgoName,
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
    #[arg(long)]
    pub instance: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub tune: TuneArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub instance: String,
    /// Approximation JSON written by `aa` or `run`.
    #[arg(long)]
    pub approx: PathBuf,
    /// Relative standard error at which simulation stops.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Write every replication's revenue to this CSV.
    #[arg(long)]
    pub revenues: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Manifest files or output directories containing `manifest.json`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(exit::USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(exit::SOLVER);
        }
    }
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Input, parse and validation problems exit with 2; failures inside the
/// solvers exit with 4.
fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(n) = cause.downcast_ref::<NrmError>() {
            return match n {
                NrmError::LpStatus(_)
                | NrmError::Stall { .. }
                | NrmError::StaleDuals(_)
                | NrmError::DegenerateDirection
                | NrmError::IncompleteTable(_) => exit::SOLVER,
                _ => exit::INVALID,
            };
        }
    }
    exit::INVALID
}
