//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ddro::bench::{
    epsilon_sweep, generate_returns, log_grid, model_train_fn, portfolio_difference_stats,
    Approach, ExperimentReport, ReturnModel, Summary, SweepSettings,
};
use ddro::dro::{solve_saa, solve_variance_wdroa_linear, solve_wdroa, solve_wdros};
use ddro::rng::{seeded_rng, DATA_STREAM, EVAL_STREAM};
use ddro::{AmbiguitySpec, NormIndex, RiskConfig, SampleSet, SolveResult, SolveStatus, SupportSpec};
use serde::Serialize;
use thiserror::Error;

use crate::svg::{LineChart, Series};
use crate::{ApproachArg, GenDataArgs, ModelArgs, RiskArgs, SolveArgs, SupportArg, SweepArgs};

/// Largest tolerated fraction of failed solves in a sweep.
const FAILURE_BUDGET: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ddro::Error> for CliError {
    fn from(e: ddro::Error) -> Self {
        use ddro::Error as E;
        match e {
            E::Solver(_) | E::InfeasibleRadius { .. } | E::EmptyCell(_) | E::UnpairedRecords { .. } => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Validated model, risk and ambiguity settings shared by the subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ReturnModel,
    pub n: usize,
    pub seed: u64,
    pub risk: RiskConfig,
    pub p: u32,
    pub q: NormIndex,
    pub support: SupportSpec,
}

impl RunConfig {
    fn new(model: &ModelArgs, risk: Option<&RiskArgs>) -> CliResult<Self> {
        if model.n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        let return_model = ReturnModel::new(model.m).map_err(|e| CliError::Usage(format!("--m: {e}")))?;
        let (risk_cfg, p, q, support) = match risk {
            Some(r) => (
                RiskConfig::new(r.rho, r.alpha)?,
                r.p,
                r.q.parse::<NormIndex>().map_err(|e| CliError::Usage(format!("--q: {e}")))?,
                match r.support {
                    SupportArg::Real => SupportSpec::FullSpace,
                    SupportArg::Limited => SupportSpec::LimitedLoss,
                },
            ),
            None => (RiskConfig::new(10.0, 0.2)?, 2, NormIndex::Two, SupportSpec::FullSpace),
        };
        if p == 0 {
            return Err(CliError::Usage("--p must be at least 1".into()));
        }
        Ok(Self {
            model: return_model,
            n: model.n,
            seed: model.seed,
            risk: risk_cfg,
            p,
            q,
            support,
        })
    }

    fn ambiguity(&self, eps: f64, decision_dependent: bool) -> CliResult<AmbiguitySpec> {
        Ok(AmbiguitySpec::new(self.p, self.q, eps, self.support, decision_dependent)?)
    }

    fn synthetic_sample(&self) -> CliResult<SampleSet> {
        Ok(generate_returns(&self.model, self.n, &mut seeded_rng(self.seed, DATA_STREAM))?)
    }
}

#[derive(Serialize)]
struct SolveLine<'a> {
    approach: &'a str,
    eps: f64,
    x: &'a [f64],
    tau: f64,
    objective: f64,
    status: &'a str,
    lambda_star: Option<f64>,
    iterations: u32,
}

fn status_label(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::NumericalLimit => "numerical_limit",
    }
}

pub fn solve(args: &SolveArgs) -> CliResult<()> {
    let cfg = RunConfig::new(&args.model, Some(&args.risk))?;
    if !(args.eps.is_finite() && args.eps >= 0.0) {
        return Err(CliError::Usage(format!("--eps must be finite and nonnegative, got {}", args.eps)));
    }
    let sample = match &args.data {
        Some(path) => {
            let file = File::open(path).map_err(io_err(format!("opening {}", path.display())))?;
            SampleSet::read_csv(file)?
        }
        None => cfg.synthetic_sample()?,
    };
    let (label, result): (&str, SolveResult) = match args.approach {
        ApproachArg::Saa => ("saa", solve_saa(&sample, &cfg.risk)?),
        ApproachArg::Wdros => ("wdros", solve_wdros(&sample, &cfg.risk, &cfg.ambiguity(args.eps, false)?)?),
        ApproachArg::Wdroa => ("wdroa", solve_wdroa(&sample, &cfg.risk, &cfg.ambiguity(args.eps, true)?)?),
        ApproachArg::VarWdroa => (
            "var-wdroa",
            solve_variance_wdroa_linear(&sample, &cfg.ambiguity(args.eps, true)?)?,
        ),
    };
    let line = SolveLine {
        approach: label,
        eps: args.eps,
        x: &result.decision.x,
        tau: result.decision.tau,
        objective: result.optimal_value,
        status: status_label(result.status),
        lambda_star: result.lambda_star,
        iterations: result.solver_iterations,
    };
    println!("{}", serde_json::to_string(&line).expect("serializable"));
    eprintln!(
        "{label}: objective {:.6}, tau {:.6}, status {}, {} iterations",
        result.optimal_value,
        result.decision.tau,
        status_label(result.status),
        result.solver_iterations
    );
    for (j, w) in result.decision.x.iter().enumerate() {
        eprintln!("  x_{:<3} {w:.6}", j + 1);
    }
    if result.is_optimal() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("solver finished with status {}", status_label(result.status))))
    }
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    let cfg = RunConfig::new(&args.model, None)?;
    let sample = cfg.synthetic_sample()?;
    let file = File::create(&args.out).map_err(io_err(format!("creating {}", args.out.display())))?;
    let mut w = BufWriter::new(file);
    sample.write_csv(&mut w)?;
    w.flush().map_err(io_err(format!("writing {}", args.out.display())))?;
    eprintln!("wrote {} x {} scenarios to {}", sample.n_scenarios(), sample.dim(), args.out.display());
    Ok(())
}

const OUTPUT_FILES: [&str; 6] = [
    "records.csv",
    "summary.csv",
    "fig_oos_portfolio.svg",
    "fig_oos_comprehensive.svg",
    "fig_tau_diff.svg",
    "fig_portfolio_diff.svg",
];

/// Creates the output directory and checks every output path is writable
/// before any solving starts.
fn prepare_outputs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    OUTPUT_FILES
        .iter()
        .map(|name| {
            let path = dir.join(name);
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(io_err(format!("opening {} for writing", path.display())))?;
            Ok(path)
        })
        .collect()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(format!("creating {}", path.display())))
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let cfg = RunConfig::new(&args.model, Some(&args.risk))?;
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    if args.eval_n == 0 {
        return Err(CliError::Usage("--eval-n must be at least 1".into()));
    }
    let eps_grid = log_grid(args.eps_min, args.eps_max, args.eps_points)?;
    // Reject unsupported (p, q, support) combinations before the long run.
    for dd in [false, true] {
        let amb = cfg.ambiguity(eps_grid[0], dd)?;
        let probe = SampleSet::from_rows(&[vec![0.0; cfg.model.m]])?;
        let solved = if dd {
            solve_wdroa(&probe, &cfg.risk, &amb)
        } else {
            solve_wdros(&probe, &cfg.risk, &amb)
        };
        if let Err(e @ ddro::Error::UnsupportedConfiguration(_)) = solved {
            return Err(e.into());
        }
    }
    let paths = prepare_outputs(&args.out)?;

    eprintln!(
        "sweep: {} runs x {} eps x 2 approaches, N = {}, m = {}, evaluation set {}",
        args.runs,
        eps_grid.len(),
        cfg.n,
        cfg.model.m,
        args.eval_n
    );
    let eval = generate_returns(&cfg.model, args.eval_n, &mut seeded_rng(cfg.seed, EVAL_STREAM))?;
    let settings = SweepSettings {
        eps_grid,
        runs: args.runs,
        risk: cfg.risk,
        p: cfg.p,
        q: cfg.q,
        support: cfg.support,
    };
    let report = epsilon_sweep(model_train_fn(cfg.model, cfg.n, cfg.seed), &eval, &settings)?;

    let mut w = create(&paths[0])?;
    report.write_records_csv(&mut w)?;
    w.flush().map_err(io_err("writing records.csv"))?;
    let mut w = create(&paths[1])?;
    report.write_summary_csv(&mut w)?;
    w.flush().map_err(io_err("writing summary.csv"))?;
    for (path, chart) in paths[2..].iter().zip(charts(&report)?) {
        fs::write(path, chart.render()).map_err(io_err(format!("writing {}", path.display())))?;
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    for s in &report.summaries {
        writeln!(out, "{}", serde_json::to_string(s).expect("serializable")).map_err(io_err("stdout"))?;
    }
    print_table(&report.summaries);
    eprintln!(
        "failed solves: {}/{}; outputs in {}",
        report.failures,
        report.total_solves(),
        args.out.display()
    );
    if report.failure_rate() > FAILURE_BUDGET {
        return Err(CliError::Numeric(format!(
            "{} of {} solves failed, above the {:.0}% budget",
            report.failures,
            report.total_solves(),
            FAILURE_BUDGET * 100.0
        )));
    }
    Ok(())
}

fn print_table(summaries: &[Summary]) {
    eprintln!(
        "{:>10} {:>4} {:>11} {:>11} {:>11} {:>8} {:>8} {:>10} {:>10}",
        "eps", "appr", "J_hat", "oos_port", "oos_comp", "rel_p", "rel_c", "tau_diff", "x_diff"
    );
    for s in summaries {
        eprintln!(
            "{:>10.3e} {:>4} {:>11.5} {:>11.5} {:>11.5} {:>8.2} {:>8.2} {:>10.5} {:>10.2e}",
            s.eps,
            s.approach,
            s.mean_j_hat,
            s.mean_oos_portfolio,
            s.mean_oos_comprehensive,
            s.reliability_portfolio,
            s.reliability_comprehensive,
            s.mean_tau_diff,
            s.mean_portfolio_linf_diff
        );
    }
}

const COLOR_S: &str = "#d62728";
const COLOR_A: &str = "#1f77b4";

/// Mean and optional quantile band of one summary cell.
type Metric = (f64, Option<(f64, f64)>);

fn approach_series(
    report: &ExperimentReport,
    metric: fn(&Summary) -> Metric,
) -> Vec<Series> {
    [(Approach::Standard, "WDROS", COLOR_S), (Approach::DecisionDependent, "WDROA", COLOR_A)]
        .into_iter()
        .map(|(approach, name, color)| Series {
            name: name.into(),
            color,
            points: report
                .summaries
                .iter()
                .filter(|s| s.approach == approach.label())
                .map(|s| {
                    let (mean, band) = metric(s);
                    (s.eps, mean, band)
                })
                .collect(),
        })
        .collect()
}

fn charts(report: &ExperimentReport) -> CliResult<Vec<LineChart>> {
    let chart = |title: &str, y_label: &str, series: Vec<Series>| LineChart {
        title: title.into(),
        x_label: "Wasserstein radius eps".into(),
        y_label: y_label.into(),
        log_x: true,
        series,
    };
    let diffs = portfolio_difference_stats(&report.records)?;
    Ok(vec![
        chart(
            "Out-of-sample performance (tau re-optimized)",
            "mean-CVaR objective",
            approach_series(report, |s| {
                (s.mean_oos_portfolio, Some((s.q20_oos_portfolio, s.q80_oos_portfolio)))
            }),
        ),
        chart(
            "Out-of-sample performance (in-sample tau)",
            "mean-CVaR objective",
            approach_series(report, |s| {
                (s.mean_oos_comprehensive, Some((s.q20_oos_comprehensive, s.q80_oos_comprehensive)))
            }),
        ),
        chart(
            "|tau_hat - tau*|",
            "absolute difference",
            approach_series(report, |s| (s.tau_diff.mean, Some((s.tau_diff.q20, s.tau_diff.q80)))),
        ),
        chart(
            "Portfolio differences ||x_S - x_A||_inf",
            "infinity-norm difference",
            vec![Series {
                name: "S vs A".into(),
                color: "#2ca02c",
                points: diffs.iter().map(|d| (d.eps, d.band.mean, Some((d.band.q20, d.band.q80)))).collect(),
            }],
        ),
    ])
}
