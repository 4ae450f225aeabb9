//! Monte Carlo experiment harness: synthetic returns, epsilon sweeps over the
//! standard and decision-dependent formulations, out-of-sample performance,
//! reliability, and holdout selection of the radius.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dro::{solve_saa, solve_wdroa, solve_wdros};
use crate::error::{Error, Result};
use crate::losses::{comprehensive_oos_objective, portfolio_oos_objective};
use crate::rng::seeded_rng;
use crate::types::{AmbiguitySpec, NormIndex, RiskConfig, SampleSet, SolveResult, SupportSpec};

/// One-factor Gaussian return model: `xi_i = psi + zeta_i` with a common
/// `psi ~ N(0, systematic_std)` and `zeta_i ~ N(i * idio_mean_slope, i * idio_std_slope)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnModel {
    pub m: usize,
    pub systematic_std: f64,
    pub idio_mean_slope: f64,
    pub idio_std_slope: f64,
}

impl ReturnModel {
    pub fn new(m: usize) -> Result<Self> {
        Self::with_params(m, 0.02, 0.03, 0.025)
    }

    pub fn with_params(m: usize, systematic_std: f64, idio_mean_slope: f64, idio_std_slope: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("the return model needs at least one asset".into()));
        }
        for (name, v) in [
            ("systematic_std", systematic_std),
            ("idio_mean_slope", idio_mean_slope),
            ("idio_std_slope", idio_std_slope),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            m,
            systematic_std,
            idio_mean_slope,
            idio_std_slope,
        })
    }

    /// Mean return of asset `i` (1-based).
    pub fn asset_mean(&self, i: usize) -> f64 {
        i as f64 * self.idio_mean_slope
    }

    /// Standard deviation of asset `i` (1-based), including the common factor.
    pub fn asset_std(&self, i: usize) -> f64 {
        self.systematic_std.hypot(i as f64 * self.idio_std_slope)
    }
}

/// Draws `n` scenarios from the model.
pub fn generate_returns<R: Rng + ?Sized>(model: &ReturnModel, n: usize, rng: &mut R) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let normal = |mean: f64, std: f64| {
        Normal::new(mean, std).map_err(|e| Error::InvalidArgument(format!("normal({mean}, {std}): {e}")))
    };
    let psi = normal(0.0, model.systematic_std)?;
    let zetas = (1..=model.m)
        .map(|i| normal(model.asset_mean(i), i as f64 * model.idio_std_slope))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(n * model.m);
    for _ in 0..n {
        let common = psi.sample(rng);
        data.extend(zetas.iter().map(|z| common + z.sample(rng)));
    }
    SampleSet::from_flat(data, n, model.m)
}

/// Which optimization problem produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Approach {
    /// Standard Wasserstein ball around the scenario empirical.
    Standard,
    /// Decision-dependent ball around the loss pushforward.
    DecisionDependent,
    Saa,
}

impl Approach {
    pub fn label(self) -> &'static str {
        match self {
            Approach::Standard => "S",
            Approach::DecisionDependent => "A",
            Approach::Saa => "SAA",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" | "WDROS" => Ok(Approach::Standard),
            "A" | "WDROA" => Ok(Approach::DecisionDependent),
            "SAA" => Ok(Approach::Saa),
            _ => Err(Error::InvalidArgument(format!("unknown approach {s:?}"))),
        }
    }
}

/// Solves one instance with the given approach; the ambiguity flag is set from
/// the approach.
pub fn solve_approach(
    approach: Approach,
    sample: &SampleSet,
    risk: &RiskConfig,
    p: u32,
    q: NormIndex,
    eps: f64,
    support: SupportSpec,
) -> Result<SolveResult> {
    match approach {
        Approach::Saa => solve_saa(sample, risk),
        Approach::Standard => solve_wdros(sample, risk, &AmbiguitySpec::new(p, q, eps, support, false)?),
        Approach::DecisionDependent => {
            solve_wdroa(sample, risk, &AmbiguitySpec::new(p, q, eps, support, true)?)
        }
    }
}

/// Result of one solve in a sweep. Metric fields are NaN when `failure` is set.
#[derive(Debug, Clone)]
pub struct Record {
    pub eps: f64,
    pub run: usize,
    pub approach: Approach,
    pub j_hat: f64,
    pub j_oos_portfolio: f64,
    pub j_oos_comprehensive: f64,
    pub tau_hat: f64,
    pub tau_star: f64,
    pub portfolio: Vec<f64>,
    pub failure: Option<String>,
}

impl Record {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    fn failed(eps: f64, run: usize, approach: Approach, m: usize, why: String) -> Self {
        Self {
            eps,
            run,
            approach,
            j_hat: f64::NAN,
            j_oos_portfolio: f64::NAN,
            j_oos_comprehensive: f64::NAN,
            tau_hat: f64::NAN,
            tau_star: f64::NAN,
            portfolio: vec![f64::NAN; m],
            failure: Some(why),
        }
    }

    pub fn tau_diff(&self) -> f64 {
        (self.tau_hat - self.tau_star).abs()
    }
}

/// Mean and 20%/80% quantiles of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub q20: f64,
    pub q80: f64,
}

impl Band {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                q20: f64::NAN,
                q80: f64::NAN,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            q20: quantile_sorted(&sorted, 0.2),
            q80: quantile_sorted(&sorted, 0.8),
        }
    }
}

/// Linearly interpolated quantile of ascending data.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = level.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Per-(eps, approach) aggregate over complete S/A pairs.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub eps: f64,
    pub approach: &'static str,
    pub mean_j_hat: f64,
    pub mean_oos_portfolio: f64,
    pub q20_oos_portfolio: f64,
    pub q80_oos_portfolio: f64,
    pub mean_oos_comprehensive: f64,
    pub q20_oos_comprehensive: f64,
    pub q80_oos_comprehensive: f64,
    pub reliability_portfolio: f64,
    pub reliability_comprehensive: f64,
    pub mean_tau_diff: f64,
    pub mean_portfolio_linf_diff: f64,
    #[serde(skip)]
    pub tau_diff: Band,
    #[serde(skip)]
    pub pairs: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Ordered by (eps index, run, approach).
    pub records: Vec<Record>,
    /// Ordered by (eps index, approach).
    pub summaries: Vec<Summary>,
    pub failures: usize,
}

impl ExperimentReport {
    pub fn total_solves(&self) -> usize {
        self.records.len()
    }

    pub fn failure_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.failures as f64 / self.records.len() as f64
        }
    }

    pub fn summary(&self, eps: f64, approach: Approach) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.eps == eps && s.approach == approach.label())
    }

    /// `records.csv`: one row per solve, portfolio weights as `x_1..x_m`.
    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let m = self.records.first().map_or(0, |r| r.portfolio.len());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header: Vec<String> = [
            "eps",
            "run",
            "approach",
            "status",
            "j_hat",
            "j_oos_portfolio",
            "j_oos_comprehensive",
            "tau_hat",
            "tau_star",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=m).map(|j| format!("x_{j}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.eps.to_string(),
                r.run.to_string(),
                r.approach.label().to_string(),
                if r.is_ok() { "ok".into() } else { "failed".into() },
                r.j_hat.to_string(),
                r.j_oos_portfolio.to_string(),
                r.j_oos_comprehensive.to_string(),
                r.tau_hat.to_string(),
                r.tau_star.to_string(),
            ];
            row.extend(r.portfolio.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `summary.csv` with the fixed column set of [`Summary`].
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        for s in &self.summaries {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Experiment settings shared by every run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub eps_grid: Vec<f64>,
    pub runs: usize,
    pub risk: RiskConfig,
    pub p: u32,
    pub q: NormIndex,
    pub support: SupportSpec,
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo <= hi and at least one point, got [{lo}, {hi}] x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let mut grid: Vec<f64> = (0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    Ok(grid)
}

/// Training-set generator drawing run `r` from its own stream of `seed`.
pub fn model_train_fn(model: ReturnModel, n: usize, seed: u64) -> impl Fn(usize) -> Result<SampleSet> + Sync {
    move |run| generate_returns(&model, n, &mut seeded_rng(seed, run as u64))
}

fn evaluate(
    eps: f64,
    run: usize,
    approach: Approach,
    train: &SampleSet,
    eval: &SampleSet,
    settings: &SweepSettings,
) -> Record {
    let m = train.dim();
    let outcome = solve_approach(approach, train, &settings.risk, settings.p, settings.q, eps, settings.support)
        .and_then(|sol| {
            if !sol.is_optimal() {
                return Err(Error::InvalidArgument(format!("solver status {:?}", sol.status)));
            }
            let (j_oos_portfolio, tau_star) = portfolio_oos_objective(&sol.decision.x, eval, &settings.risk)?;
            let j_oos_comprehensive = comprehensive_oos_objective(&sol.decision, eval, &settings.risk)?;
            Ok(Record {
                eps,
                run,
                approach,
                j_hat: sol.optimal_value,
                j_oos_portfolio,
                j_oos_comprehensive,
                tau_hat: sol.decision.tau,
                tau_star,
                portfolio: sol.decision.x,
                failure: None,
            })
        });
    outcome.unwrap_or_else(|e| {
        warn!("eps = {eps:e}, run {run}, approach {approach}: {e}");
        Record::failed(eps, run, approach, m, e.to_string())
    })
}

/// Runs every (run, eps, approach in {S, A}) solve and aggregates.
///
/// Runs execute in parallel; each obtains its training set from `train_fn(run)`,
/// so results do not depend on scheduling. Failed solves are kept as marked
/// records and excluded from the summaries together with their partner.
pub fn epsilon_sweep<G>(train_fn: G, eval: &SampleSet, settings: &SweepSettings) -> Result<ExperimentReport>
where
    G: Fn(usize) -> Result<SampleSet> + Sync,
{
    if settings.eps_grid.is_empty() || settings.runs == 0 {
        return Err(Error::EmptyInput);
    }
    if settings.eps_grid.windows(2).any(|w| w[0] > w[1]) || settings.eps_grid.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidArgument("eps grid must be nonnegative and ascending".into()));
    }
    let per_run: Vec<Vec<Record>> = (0..settings.runs)
        .into_par_iter()
        .map(|run| -> Result<Vec<Record>> {
            let train = train_fn(run)?;
            if train.dim() != eval.dim() {
                return Err(Error::DimensionMismatch {
                    expected: eval.dim(),
                    got: train.dim(),
                });
            }
            Ok(settings
                .eps_grid
                .iter()
                .flat_map(|&eps| {
                    [Approach::Standard, Approach::DecisionDependent]
                        .map(|a| evaluate(eps, run, a, &train, eval, settings))
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let index_of = |eps: f64| settings.eps_grid.iter().position(|&e| e == eps).unwrap_or(usize::MAX);
    let mut records: Vec<Record> = per_run.into_iter().flatten().collect();
    records.sort_by_key(|r| (index_of(r.eps), r.run, r.approach));
    let failures = records.iter().filter(|r| !r.is_ok()).count();
    let summaries = summarize(&records, &settings.eps_grid)?;
    Ok(ExperimentReport {
        records,
        summaries,
        failures,
    })
}

/// Complete (both approaches succeeded) S/A pairs at one eps, ordered by run.
fn complete_pairs(records: &[Record], eps: f64) -> Vec<(&Record, &Record)> {
    let mut by_run: BTreeMap<usize, (Option<&Record>, Option<&Record>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.eps == eps && r.is_ok()) {
        let slot = by_run.entry(r.run).or_default();
        match r.approach {
            Approach::Standard => slot.0 = Some(r),
            Approach::DecisionDependent => slot.1 = Some(r),
            Approach::Saa => {}
        }
    }
    by_run
        .into_values()
        .filter_map(|(s, a)| Some((s?, a?)))
        .collect()
}

fn linf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

fn summarize(records: &[Record], eps_grid: &[f64]) -> Result<Vec<Summary>> {
    let mut out = Vec::new();
    for &eps in eps_grid {
        let pairs = complete_pairs(records, eps);
        let diffs: Vec<f64> = pairs.iter().map(|(s, a)| linf_diff(&s.portfolio, &a.portfolio)).collect();
        let mean_diff = Band::of(&diffs).mean;
        for approach in [Approach::Standard, Approach::DecisionDependent] {
            let recs: Vec<&Record> = pairs
                .iter()
                .map(|(s, a)| if approach == Approach::Standard { *s } else { *a })
                .collect();
            let metric = |f: fn(&Record) -> f64| recs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let oos_p = Band::of(&metric(|r| r.j_oos_portfolio));
            let oos_c = Band::of(&metric(|r| r.j_oos_comprehensive));
            let tau = Band::of(&metric(Record::tau_diff));
            let frac = |ok: fn(&Record) -> bool| {
                if recs.is_empty() {
                    f64::NAN
                } else {
                    recs.iter().filter(|r| ok(r)).count() as f64 / recs.len() as f64
                }
            };
            out.push(Summary {
                eps,
                approach: approach.label(),
                mean_j_hat: Band::of(&metric(|r| r.j_hat)).mean,
                mean_oos_portfolio: oos_p.mean,
                q20_oos_portfolio: oos_p.q20,
                q80_oos_portfolio: oos_p.q80,
                mean_oos_comprehensive: oos_c.mean,
                q20_oos_comprehensive: oos_c.q20,
                q80_oos_comprehensive: oos_c.q80,
                reliability_portfolio: frac(|r| r.j_oos_portfolio <= r.j_hat),
                reliability_comprehensive: frac(|r| r.j_oos_comprehensive <= r.j_hat),
                mean_tau_diff: tau.mean,
                mean_portfolio_linf_diff: mean_diff,
                tau_diff: tau,
                pairs: recs.len(),
            });
        }
    }
    Ok(out)
}

/// Which out-of-sample functional a reliability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReliabilityKind {
    /// Tau re-optimized on the evaluation set.
    Portfolio,
    /// Tau held at the in-sample value.
    Comprehensive,
}

/// Fraction of successful runs with out-of-sample value at most the in-sample
/// optimum, per eps in ascending order of first appearance.
pub fn reliability(records: &[Record], approach: Approach, kind: ReliabilityKind) -> Result<Vec<(f64, f64)>> {
    let mut order: Vec<f64> = Vec::new();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for r in records.iter().filter(|r| r.approach == approach) {
        let k = match order.iter().position(|&e| e == r.eps) {
            Some(k) => k,
            None => {
                order.push(r.eps);
                counts.push((0, 0));
                order.len() - 1
            }
        };
        if r.is_ok() {
            let oos = match kind {
                ReliabilityKind::Portfolio => r.j_oos_portfolio,
                ReliabilityKind::Comprehensive => r.j_oos_comprehensive,
            };
            counts[k].1 += 1;
            if oos <= r.j_hat {
                counts[k].0 += 1;
            }
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyInput);
    }
    order
        .into_iter()
        .zip(counts)
        .map(|(eps, (hit, total))| {
            if total == 0 {
                Err(Error::EmptyCell(eps))
            } else {
                Ok((eps, hit as f64 / total as f64))
            }
        })
        .collect()
}

/// `||x^S - x^A||_inf` statistics per eps over successful pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceStats {
    pub eps: f64,
    pub band: Band,
    pub pairs: usize,
}

/// Portfolio differences between the two approaches. Every (eps, run) with a
/// record of one approach must have a record (possibly failed) of the other.
pub fn portfolio_difference_stats(records: &[Record]) -> Result<Vec<DifferenceStats>> {
    let mut keys: Vec<f64> = Vec::new();
    let mut seen: BTreeMap<(usize, usize), (bool, bool)> = BTreeMap::new();
    for r in records {
        let k = match keys.iter().position(|&e| e == r.eps) {
            Some(k) => k,
            None => {
                keys.push(r.eps);
                keys.len() - 1
            }
        };
        let slot = seen.entry((k, r.run)).or_default();
        match r.approach {
            Approach::Standard => slot.0 = true,
            Approach::DecisionDependent => slot.1 = true,
            Approach::Saa => {}
        }
    }
    if let Some(((k, run), _)) = seen.iter().find(|(_, (s, a))| s != a) {
        return Err(Error::UnpairedRecords {
            eps: keys[*k],
            run: *run,
        });
    }
    Ok(keys
        .into_iter()
        .map(|eps| {
            let diffs: Vec<f64> = complete_pairs(records, eps)
                .iter()
                .map(|(s, a)| linf_diff(&s.portfolio, &a.portfolio))
                .collect();
            DifferenceStats {
                eps,
                band: Band::of(&diffs),
                pairs: diffs.len(),
            }
        })
        .collect())
}

/// Holdout selection of the radius: shuffles the sample, trains on the first
/// `split` fraction, and returns the grid value minimizing the portfolio
/// objective on the remainder. Ties go to the smaller eps.
#[allow(clippy::too_many_arguments)]
pub fn holdout_cv_epsilon<R: Rng + ?Sized>(
    sample: &SampleSet,
    split: f64,
    eps_grid: &[f64],
    risk: &RiskConfig,
    approach: Approach,
    p: u32,
    q: NormIndex,
    support: SupportSpec,
    rng: &mut R,
) -> Result<f64> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidArgument(format!("split must lie in (0, 1), got {split}")));
    }
    if eps_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = sample.n_scenarios();
    let n_train = (n as f64 * split).floor() as usize;
    if n_train < 2 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "split {split} of {n} scenarios leaves {n_train} for training and {} for holdout",
            n - n_train.min(n)
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let train = sample.select(&idx[..n_train])?;
    let holdout = sample.select(&idx[n_train..])?;
    let mut best: Option<(f64, f64)> = None;
    for &eps in eps_grid {
        let sol = solve_approach(approach, &train, risk, p, q, eps, support)?;
        let (value, _) = portfolio_oos_objective(&sol.decision.x, &holdout, risk)?;
        let better = match best {
            None => true,
            Some((b_eps, b_val)) => value < b_val || (value == b_val && eps < b_eps),
        };
        if better {
            best = Some((eps, value));
        }
    }
    Ok(best.map(|(eps, _)| eps).expect("grid is nonempty"))
}
