//! `mobitomo`: infer routing topologies from end-to-end path delays.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage,
//! configuration or input-format errors.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "MOBITOMO_SEED";

#[derive(Debug, Parser)]
#[command(name = "mobitomo", version, about = "Routing-topology inference from path delay cumulants")]
pub struct Cli {
    /// Worker threads for parallel stages (default: one per core).
    /// Results do not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a scenario (topology, monitors, link delay laws, routing) and
    /// optionally sample path delays from it.
    Generate(GenerateArgs),
    /// Full-lattice Mobius inference: exact from a scenario, or from a
    /// delay sample with at most 4 paths.
    Mia(MiaArgs),
    /// Sparse pipeline: bounding topology, modified inversion and lasso.
    Sparse(SparseArgs),
    /// Score an estimated routing matrix against the truth.
    Eval(EvalArgs),
    /// Run a batch of synthetic experiments and write CSV summaries.
    Campaign(CampaignArgs),
    /// Tune the lasso weights (lambda, b) over a set of scenarios.
    GridSearch(GridArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["topology", "random_nodes"])))]
pub struct GenerateArgs {
    /// Topology JSON file.
    #[arg(long, value_name = "FILE")]
    pub topology: Option<PathBuf>,
    /// Generate a random connected topology with this many nodes instead.
    #[arg(long, value_name = "N")]
    pub random_nodes: Option<usize>,
    /// Average node degree of the random topology.
    #[arg(long, default_value_t = 2.5, value_name = "D")]
    pub avg_degree: f64,
    /// Number of monitor nodes; paths join every pair of monitors.
    #[arg(long, value_name = "K")]
    pub monitors: usize,
    /// Rows of path delays to sample (0 writes no sample).
    #[arg(long, default_value_t = 0, value_name = "N")]
    pub samples: usize,
    /// JSON with the link-delay parameters (mean_mu, sd_mu, min_mu, scale).
    #[arg(long, value_name = "FILE")]
    pub delay_config: Option<PathBuf>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["samples", "scenario"])))]
pub struct MiaArgs {
    /// Delay sample CSV (header of path ids, one row per measurement).
    #[arg(long, value_name = "FILE")]
    pub samples: Option<PathBuf>,
    /// Scenario JSON; runs exact inference from the true link laws.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Number of contiguous sample splits for the nonzero test.
    #[arg(long, default_value_t = 30, value_name = "M")]
    pub splits: usize,
    /// Use this many bootstrap resamples instead of splits.
    #[arg(long, value_name = "M")]
    pub bootstrap: Option<usize>,
    /// Significance level of the two-sided t-test.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Cumulant order for exact inference (default: the path count).
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["samples", "scenario"])))]
pub struct SparseArgs {
    /// Delay sample CSV.
    #[arg(long, value_name = "FILE")]
    pub samples: Option<PathBuf>,
    /// Scenario JSON; runs on exact cumulants with observed values pinned.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Pipeline config JSON (defaults follow the sample size).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub i_max: Option<usize>,
    #[arg(long)]
    pub i_f: Option<usize>,
    /// Size cap of the modified inversion.
    #[arg(long)]
    pub s: Option<usize>,
    /// Bootstrap resamples behind each test.
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Result JSON from `mia` or `sparse`, or a routing matrix JSON.
    #[arg(long, value_name = "FILE")]
    pub estimate: PathBuf,
    /// Scenario JSON or routing matrix JSON.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Campaign config JSON.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Campaign config JSON naming the scenarios to tune on.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Comma-separated lambda values (default 0, 0.2, ..., 4).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Comma-separated b values (default 0, 0.1, ..., 1).
    #[arg(long, value_delimiter = ',')]
    pub bs: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
