//! `ddro`: solve single instances, run epsilon sweeps, and generate synthetic
//! return data.
//!
//! Machine-readable results go to stdout as JSON lines; human-readable tables
//! and diagnostics go to stderr. Exit codes: 0 success, 2 usage or
//! configuration error, 3 numeric or solver failure.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ddro", version, about = "Decision-dependent Wasserstein DRO for mean-CVaR portfolios")]
struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "DDRO_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and print the decision as a JSON line.
    Solve(SolveArgs),
    /// Run an epsilon sweep and write records, summaries and charts.
    Sweep(SweepArgs),
    /// Write synthetic returns from the one-factor model as CSV.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproachArg {
    Saa,
    Wdros,
    Wdroa,
    VarWdroa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupportArg {
    /// Returns range over the whole space.
    Real,
    /// Returns bounded below by -1 (losses of at most 100%).
    Limited,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of assets for synthetic data.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Number of scenarios for synthetic data.
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RiskArgs {
    /// Weight of CVaR in the objective.
    #[arg(long, default_value_t = 10.0)]
    pub rho: f64,
    /// CVaR tail level.
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    /// Wasserstein order.
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    /// Transport cost norm: 1, 2 or inf.
    #[arg(long, default_value = "2")]
    pub q: String,
    #[arg(long, value_enum, default_value_t = SupportArg::Real)]
    pub support: SupportArg,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Scenario CSV (header xi_1..xi_m).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    /// Draw the sample from the synthetic return model instead.
    #[arg(long)]
    pub synthetic: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub approach: ApproachArg,
    /// Wasserstein radius.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[command(flatten)]
    pub risk: RiskArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Independent training sets.
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 20)]
    pub eps_points: usize,
    /// Size of the out-of-sample evaluation set.
    #[arg(long, default_value_t = 200_000)]
    pub eval_n: usize,
    #[command(flatten)]
    pub risk: RiskArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Solve(args) => commands::solve(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::GenData(args) => commands::gen_data(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
