//! Mean-CVaR portfolio solvers: SAA, the standard Wasserstein DRO (ball around
//! the scenario empirical) and the decision-dependent variant (ball around the
//! loss pushforward with radius scaled by the Lipschitz constant).
//!
//! Variable layout shared by every program: `x` (m), `tau`, `s` (N), then
//! formulation-specific auxiliaries.

use log::{debug, trace};

use crate::conic::{golden_section_min, solve, ConicProgram, ConicSolution, SocConstraint};
use crate::error::{Error, Result};
use crate::losses::{cvar_loss, PiecewiseMaxAffineLoss};
use crate::transport::{worst_case_mean_1d, DiscreteDistribution1D};
use crate::types::{
    validate_sample, AmbiguitySpec, Decision, NormIndex, RiskConfig, SampleSet, SolveResult,
    SolveStatus, SupportSpec, PROJECTION_TOL,
};

struct Layout {
    m: usize,
    n: usize,
}

impl Layout {
    fn x(&self, j: usize) -> usize {
        j
    }
    fn tau(&self) -> usize {
        self.m
    }
    fn s(&self, i: usize) -> usize {
        self.m + 1 + i
    }
}

/// Simplex constraints, `(1/N) sum s_i` objective, and the epigraph rows
/// `a_k <x, xi_i> + b_k tau + (extra_k(i)) <= s_i` for every scenario and piece.
fn base_program<E>(
    sample: &SampleSet,
    loss: &PiecewiseMaxAffineLoss,
    n_vars: usize,
    mut extra: E,
) -> (ConicProgram, Layout)
where
    E: FnMut(usize, usize, &mut Vec<(usize, f64)>),
{
    let layout = Layout {
        m: sample.dim(),
        n: sample.n_scenarios(),
    };
    let mut prog = ConicProgram::new(n_vars);
    let inv_n = 1.0 / layout.n as f64;
    for i in 0..layout.n {
        prog.set_objective(layout.s(i), inv_n);
    }
    for j in 0..layout.m {
        prog.set_bounds(layout.x(j), 0.0, f64::INFINITY);
    }
    prog.add_eq((0..layout.m).map(|j| (layout.x(j), 1.0)).collect(), 1.0);
    for (i, xi) in sample.rows().enumerate() {
        for (k, (&a, &b)) in loss.slopes().iter().zip(loss.tau_coefficients()).enumerate() {
            let mut row: Vec<(usize, f64)> = xi
                .iter()
                .enumerate()
                .map(|(j, &v)| (layout.x(j), a * v))
                .collect();
            row.push((layout.tau(), b));
            row.push((layout.s(i), -1.0));
            extra(i, k, &mut row);
            prog.add_le(row, 0.0);
        }
    }
    (prog, layout)
}

/// `scale * ||x||_{norm} <= v_t`, using `x >= 0`.
fn add_scaled_norm_bound(prog: &mut ConicProgram, layout: &Layout, norm: NormIndex, scale: f64, t: usize) {
    match norm {
        NormIndex::Two => {
            let xs: Vec<usize> = (0..layout.m).map(|j| layout.x(j)).collect();
            prog.add_norm_epigraph(&xs, scale, t);
        }
        NormIndex::Inf => {
            for j in 0..layout.m {
                prog.add_le(vec![(layout.x(j), scale), (t, -1.0)], 0.0);
            }
        }
        NormIndex::One => {
            let mut row: Vec<(usize, f64)> = (0..layout.m).map(|j| (layout.x(j), scale)).collect();
            row.push((t, -1.0));
            prog.add_le(row, 0.0);
        }
    }
}

fn into_result(layout: &Layout, sol: &ConicSolution, constant: f64, lambda_star: Option<f64>) -> SolveResult {
    let x = sol.values[..layout.m].to_vec();
    let tau = sol.values[layout.tau()];
    let raw = Decision::new(x, tau);
    let (decision, status) = match raw.clone().projected(PROJECTION_TOL) {
        Some(d) => (d, SolveStatus::Optimal),
        None => (raw, SolveStatus::NumericalLimit),
    };
    SolveResult {
        decision,
        optimal_value: sol.objective + constant,
        status,
        solver_iterations: sol.iterations,
        lambda_star,
    }
}

fn check_inputs(sample: &SampleSet, support: &SupportSpec) -> Result<()> {
    validate_sample(sample, support)
}

/// `min_{x in simplex, tau} (1/N) sum_i max_k (a_k <x, xi_i> + b_k tau)`.
pub fn solve_saa(sample: &SampleSet, risk: &RiskConfig) -> Result<SolveResult> {
    check_inputs(sample, &SupportSpec::FullSpace)?;
    saa_with_loss(sample, &cvar_loss(risk))
}

fn saa_with_loss(sample: &SampleSet, loss: &PiecewiseMaxAffineLoss) -> Result<SolveResult> {
    let n_vars = sample.dim() + 1 + sample.n_scenarios();
    let (prog, layout) = base_program(sample, loss, n_vars, |_, _, _| {});
    let sol = solve(&prog)?;
    Ok(into_result(&layout, &sol, 0.0, None))
}

fn check_portfolio_config(amb: &AmbiguitySpec) -> Result<()> {
    match (amb.support, amb.p, amb.q) {
        (SupportSpec::FullSpace, 1 | 2, _) => Ok(()),
        (SupportSpec::LimitedLoss, 1, NormIndex::One) => Ok(()),
        (support, p, q) => Err(Error::UnsupportedConfiguration(format!(
            "p = {p}, q = {q:?}, support = {support:?}; portfolio solvers support full space with p in {{1, 2}} \
             and the limited-loss support with p = 1 and the 1-norm cost"
        ))),
    }
}

/// `sup_{xi in support} F(x, tau, xi)` for the simplex-constrained portfolio.
fn loss_supremum(loss: &PiecewiseMaxAffineLoss, d: &Decision, support: &SupportSpec) -> f64 {
    let mass: f64 = d.x.iter().sum();
    if mass == 0.0 {
        return loss.evaluate_return(0.0, d.tau);
    }
    match support {
        SupportSpec::LimitedLoss => {
            // <x, xi> ranges over [-sum x, inf) on { xi >= -1 }.
            loss.slopes()
                .iter()
                .zip(loss.tau_coefficients())
                .map(|(&a, &b)| if a > 0.0 { f64::INFINITY } else { -a * mass + b * d.tau })
                .fold(f64::NEG_INFINITY, f64::max)
        }
        _ => {
            if loss.slopes().iter().any(|&a| a != 0.0) {
                f64::INFINITY
            } else {
                loss.evaluate_return(0.0, d.tau)
            }
        }
    }
}

/// Inner worst-case expectation of the decision-dependent problem at a fixed
/// decision: the worst-case mean of the loss pushforward over the scalar ball
/// of radius `eps * gamma_{x,F,q}`, capped at `sup_xi F` when `p = 1`.
pub fn wdroa_closed_form_value(
    sample: &SampleSet,
    risk: &RiskConfig,
    d: &Decision,
    amb: &AmbiguitySpec,
) -> Result<f64> {
    let loss = cvar_loss(risk);
    let values = loss.pushforward(d, sample)?;
    let radius = amb.epsilon * loss.lipschitz_norm(&d.x, amb.q);
    let cap = loss_supremum(&loss, d, &amb.support);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if cap == f64::INFINITY {
        return Ok(mean + radius);
    }
    if amb.p == 1 {
        let pushforward = DiscreteDistribution1D::uniform(values)?;
        let support = SupportSpec::Interval1D {
            lo: f64::NEG_INFINITY,
            hi: cap,
        };
        return worst_case_mean_1d(&pushforward, radius, 1, &support);
    }
    Err(Error::UnsupportedConfiguration(
        "bounded loss image requires p = 1".into(),
    ))
}

/// Decision-dependent DRO:
/// `min_{x, tau} (1/N) sum_i F(x, tau, xi_i) + eps * gamma_{x,F,q}`, where
/// `gamma = ||x||_{q*} max_k |a_k|`.
///
/// With the limited-loss support the objective is additionally capped at
/// `sup_xi F`; minimizing the smaller of two convex objectives is the smaller
/// of the two minima.
pub fn solve_wdroa(sample: &SampleSet, risk: &RiskConfig, amb: &AmbiguitySpec) -> Result<SolveResult> {
    if !amb.decision_dependent {
        return Err(Error::InvalidArgument(
            "solve_wdroa expects a decision-dependent ambiguity set".into(),
        ));
    }
    check_portfolio_config(amb)?;
    check_inputs(sample, &amb.support)?;
    let loss = cvar_loss(risk);
    if amb.epsilon == 0.0 {
        return saa_with_loss(sample, &loss);
    }
    let result = wdroa_regularized(sample, &loss, amb.epsilon, amb.q)?;
    if amb.support == SupportSpec::LimitedLoss {
        if let Some(capped) = limited_loss_cap(&loss, sample.dim()) {
            if capped.optimal_value < result.optimal_value {
                debug!(
                    "support cap {} undercuts the regularized value {}",
                    capped.optimal_value, result.optimal_value
                );
                return Ok(capped);
            }
        }
    }
    Ok(result)
}

fn wdroa_regularized(
    sample: &SampleSet,
    loss: &PiecewiseMaxAffineLoss,
    eps: f64,
    q: NormIndex,
) -> Result<SolveResult> {
    let base = sample.dim() + 1 + sample.n_scenarios();
    let lambda = base;
    let (mut prog, layout) = base_program(sample, loss, base + 1, |_, _, _| {});
    prog.set_objective(lambda, eps);
    add_scaled_norm_bound(&mut prog, &layout, q.dual(), loss.max_abs_slope(), lambda);
    let sol = solve(&prog)?;
    Ok(into_result(&layout, &sol, 0.0, None))
}

/// `min_tau max_k (-a_k + b_k tau)`: the value of `sup_{xi >= -1} F` minimized
/// over the simplex (where `sum x = 1`) and tau.
fn limited_loss_cap(loss: &PiecewiseMaxAffineLoss, m: usize) -> Option<SolveResult> {
    if loss.slopes().iter().any(|&a| a > 0.0) {
        return None;
    }
    // Breakpoints of a convex piecewise-linear function of tau contain its minimizer
    // whenever the minimum is attained.
    let pieces: Vec<(f64, f64)> = loss
        .slopes()
        .iter()
        .zip(loss.tau_coefficients())
        .map(|(&a, &b)| (-a, b))
        .collect();
    let eval = |t: f64| pieces.iter().map(|(c, b)| c + b * t).fold(f64::NEG_INFINITY, f64::max);
    let has_pos = pieces.iter().any(|&(_, b)| b > 0.0);
    let has_neg = pieces.iter().any(|&(_, b)| b < 0.0);
    let mut candidates = Vec::new();
    if !(has_pos && has_neg) {
        if has_pos || has_neg {
            return None;
        }
        candidates.push(0.0);
    }
    for (i, &(c1, b1)) in pieces.iter().enumerate() {
        for &(c2, b2) in &pieces[i + 1..] {
            if b1 != b2 {
                candidates.push((c2 - c1) / (b1 - b2));
            }
        }
    }
    let tau = candidates
        .into_iter()
        .min_by(|a, b| eval(*a).total_cmp(&eval(*b)))?;
    Some(SolveResult {
        decision: Decision::equally_weighted(m, tau),
        optimal_value: eval(tau),
        status: SolveStatus::Optimal,
        solver_iterations: 0,
        lambda_star: None,
    })
}

/// Standard Wasserstein DRO over the ball of radius eps around the empirical law.
///
/// * Full space, `p = 1`: one program with `||a_k x||_{q*} <= lambda` for each piece.
/// * Full space, `p = 2`: for fixed `lambda > 0` the inner supremum is
///   `a_k <x, xi_i> + b_k tau + a_k^2 ||x||_{q*}^2 / (4 lambda)`, a convex program
///   in `(x, tau, s)`; the outer `lambda` is found by a bracketed log-grid scan
///   followed by golden-section refinement.
/// * Limited loss, `p = 1`, 1-norm cost: a single LP with dual multipliers
///   `gamma_{i,k} >= 0` for the support constraint.
pub fn solve_wdros(sample: &SampleSet, risk: &RiskConfig, amb: &AmbiguitySpec) -> Result<SolveResult> {
    if amb.decision_dependent {
        return Err(Error::InvalidArgument(
            "solve_wdros expects a decision-independent ambiguity set".into(),
        ));
    }
    check_portfolio_config(amb)?;
    check_inputs(sample, &amb.support)?;
    let loss = cvar_loss(risk);
    if amb.epsilon == 0.0 {
        return saa_with_loss(sample, &loss);
    }
    match (amb.support, amb.p) {
        (SupportSpec::LimitedLoss, _) => limited_loss_standard(sample, &loss, amb.epsilon).map(|(r, _)| r),
        (_, 1) => wdros_type1_full(sample, &loss, amb.epsilon, amb.q),
        _ => wdros_type2_full(sample, &loss, amb.epsilon, amb.q),
    }
}

fn wdros_type1_full(
    sample: &SampleSet,
    loss: &PiecewiseMaxAffineLoss,
    eps: f64,
    q: NormIndex,
) -> Result<SolveResult> {
    let base = sample.dim() + 1 + sample.n_scenarios();
    let lambda = base;
    let (mut prog, layout) = base_program(sample, loss, base + 1, |_, _, _| {});
    prog.set_objective(lambda, eps);
    for &a in loss.slopes() {
        add_scaled_norm_bound(&mut prog, &layout, q.dual(), a.abs(), lambda);
    }
    let sol = solve(&prog)?;
    let mut result = into_result(&layout, &sol, 0.0, None);
    result.lambda_star = Some(sol.values[lambda]);
    Ok(result)
}

/// Inner program of the type-2 problem at a fixed multiplier. The squared dual
/// norm `||x||_{q*}^2 <= t` is written as the rotated cone
/// `||(2u, t - 1)||_2 <= t + 1` with `u` bounding the dual norm.
fn type2_inner_program(
    sample: &SampleSet,
    loss: &PiecewiseMaxAffineLoss,
    lambda: f64,
    q: NormIndex,
) -> (ConicProgram, Layout) {
    let base = sample.dim() + 1 + sample.n_scenarios();
    let t = base;
    let u = base + 1;
    let slopes = loss.slopes().to_vec();
    let (mut prog, layout) = base_program(sample, loss, base + 2, |_, k, row| {
        row.push((t, slopes[k] * slopes[k] / (4.0 * lambda)));
    });
    add_scaled_norm_bound(&mut prog, &layout, q.dual(), 1.0, u);
    prog.add_soc(SocConstraint {
        a: vec![vec![(u, 2.0)], vec![(t, 1.0)]],
        b: vec![0.0, -1.0],
        c: vec![(t, 1.0)],
        d: 1.0,
    });
    (prog, layout)
}

const LAMBDA_FLOOR: f64 = 1e-12;
const LAMBDA_CEIL: f64 = 1e15;
const GRID_POINTS: usize = 25;

fn wdros_type2_full(
    sample: &SampleSet,
    loss: &PiecewiseMaxAffineLoss,
    eps: f64,
    q: NormIndex,
) -> Result<SolveResult> {
    let eps2 = eps * eps;
    let mut evaluations: Vec<(f64, Result<SolveResult>)> = Vec::new();
    let mut value_at = |lambda: f64| -> f64 {
        if let Some((_, r)) = evaluations.iter().find(|(l, _)| *l == lambda) {
            return r.as_ref().map(|r| r.optimal_value).unwrap_or(f64::INFINITY);
        }
        let (prog, layout) = type2_inner_program(sample, loss, lambda, q);
        let r = solve(&prog).map(|sol| into_result(&layout, &sol, lambda * eps2, Some(lambda)));
        let v = r.as_ref().map(|r| r.optimal_value).unwrap_or(f64::INFINITY);
        evaluations.push((lambda, r.map_err(Error::from)));
        v
    };

    // For a single active piece the optimal multiplier is |a| ||x||_{q*} / (2 eps);
    // the SAA portfolio gives the scale.
    let saa = saa_with_loss(sample, loss)?;
    let scale = loss.max_abs_slope() * q.dual().norm(&saa.decision.x);
    let lambda0 = (scale / (2.0 * eps)).clamp(1e-8, 1e12);
    let mut lo = (lambda0 / 64.0).max(LAMBDA_FLOOR);
    let mut hi = (lambda0 * 64.0).min(LAMBDA_CEIL);

    while lo > LAMBDA_FLOOR && value_at(lo) <= value_at(lo * 4.0) {
        lo = (lo / 64.0).max(LAMBDA_FLOOR);
    }
    while hi < LAMBDA_CEIL && value_at(hi) <= value_at(hi / 4.0) {
        hi = (hi * 64.0).min(LAMBDA_CEIL);
    }

    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    let step = (log_hi - log_lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|k| log_lo + step * k as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&g| value_at(g.exp())).collect();
    let k_best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let a = grid[k_best.saturating_sub(1)];
    let b = grid[(k_best + 1).min(GRID_POINTS - 1)];
    golden_section_min(|g| value_at(g.exp()), a, b, 1e-5);

    if log::log_enabled!(log::Level::Trace) {
        for (l, r) in &evaluations {
            trace!("type-2 multiplier search: V({l:.6e}) = {:?}", r.as_ref().map(|r| r.optimal_value));
        }
    }
    let (lambda_star, best) = evaluations
        .into_iter()
        .filter_map(|(l, r)| r.ok().map(|r| (l, r)))
        .min_by(|a, b| a.1.optimal_value.total_cmp(&b.1.optimal_value))
        .ok_or_else(|| Error::Solver(crate::conic::SolverError::NumericalLimit(
            "every inner program of the multiplier search failed".into(),
        )))?;
    debug!("type-2 standard DRO: lambda* = {lambda_star:.6e}, value = {}", best.optimal_value);
    Ok(best)
}

/// Dual multipliers of the support constraint in the limited-loss standard LP,
/// indexed `[scenario][piece][asset]`.
#[derive(Debug, Clone)]
pub struct SupportMultipliers {
    pub gamma: Vec<Vec<Vec<f64>>>,
}

impl SupportMultipliers {
    /// Number of scenarios whose per-piece multiplier vectors are split as
    /// "exactly one piece has all-zero multipliers", out of the total.
    pub fn one_zero_piece_count(&self, tol: f64) -> (usize, usize) {
        let split = self
            .gamma
            .iter()
            .filter(|pieces| {
                pieces
                    .iter()
                    .filter(|g| g.iter().all(|v| v.abs() <= tol))
                    .count()
                    == pieces.len() - 1
            })
            .count();
        (split, self.gamma.len())
    }
}

/// Limited-loss standard DRO (`p = 1`, 1-norm cost) as the LP
///
/// ```text
/// min  lambda eps + (1/N) sum_i s_i
/// s.t. <g_ik, e + xi_i> + a_k <x, xi_i> + b_k tau <= s_i
///      ||g_ik + a_k x||_inf <= lambda,   g_ik >= 0
/// ```
///
/// also returning the multipliers `g_ik`.
pub fn limited_loss_standard(
    sample: &SampleSet,
    loss: &PiecewiseMaxAffineLoss,
    eps: f64,
) -> Result<(SolveResult, SupportMultipliers)> {
    check_inputs(sample, &SupportSpec::LimitedLoss)?;
    let m = sample.dim();
    let n = sample.n_scenarios();
    let k_count = loss.n_pieces();
    let base = m + 1 + n;
    let lambda = base;
    let gamma = |i: usize, k: usize, j: usize| base + 1 + (i * k_count + k) * m + j;
    let n_vars = base + 1 + n * k_count * m;
    let rows: Vec<Vec<f64>> = sample.rows().map(|r| r.to_vec()).collect();
    let (mut prog, layout) = base_program(sample, loss, n_vars, |i, k, row| {
        for (j, v) in rows[i].iter().enumerate() {
            row.push((gamma(i, k, j), 1.0 + v));
        }
    });
    prog.set_objective(lambda, eps);
    for i in 0..n {
        for (k, &a) in loss.slopes().iter().enumerate() {
            for j in 0..m {
                let g = gamma(i, k, j);
                prog.set_bounds(g, 0.0, f64::INFINITY);
                prog.add_le(vec![(g, 1.0), (layout.x(j), a), (lambda, -1.0)], 0.0);
                prog.add_le(vec![(g, -1.0), (layout.x(j), -a), (lambda, -1.0)], 0.0);
            }
        }
    }
    let sol = solve(&prog)?;
    let mut result = into_result(&layout, &sol, 0.0, None);
    result.lambda_star = Some(sol.values[lambda]);
    let multipliers = SupportMultipliers {
        gamma: (0..n)
            .map(|i| {
                (0..k_count)
                    .map(|k| (0..m).map(|j| sol.values[gamma(i, k, j)]).collect())
                    .collect()
            })
            .collect(),
    };
    let (split, total) = multipliers.one_zero_piece_count(1e-7);
    debug!("limited-loss standard LP: {split}/{total} scenarios with exactly one zero multiplier block");
    Ok((result, multipliers))
}

/// Limited-loss decision-dependent LP without the support cap:
/// `min lambda eps + (1/N) sum s_i` s.t. epigraph rows and `max_k |a_k| ||x||_inf <= lambda`.
pub fn limited_loss_decision_dependent(
    sample: &SampleSet,
    risk: &RiskConfig,
    eps: f64,
) -> Result<SolveResult> {
    check_inputs(sample, &SupportSpec::LimitedLoss)?;
    wdroa_regularized(sample, &cvar_loss(risk), eps, NormIndex::One)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn risk(rho: f64, alpha: f64) -> RiskConfig {
        RiskConfig::new(rho, alpha).unwrap()
    }

    fn full(p: u32, eps: f64, dd: bool) -> AmbiguitySpec {
        AmbiguitySpec::new(p, NormIndex::Two, eps, SupportSpec::FullSpace, dd).unwrap()
    }

    fn fixture() -> SampleSet {
        SampleSet::from_rows(&[
            vec![0.05, -0.02, 0.11],
            vec![-0.03, 0.04, -0.08],
            vec![0.02, 0.01, 0.15],
            vec![0.00, -0.05, 0.02],
            vec![0.07, 0.03, -0.12],
        ])
        .unwrap()
    }

    #[test]
    fn saa_single_scenario_linear() {
        let s = SampleSet::from_rows(&[vec![0.2, 0.1]]).unwrap();
        let r = solve_saa(&s, &risk(0.0, 0.5)).unwrap();
        assert!(r.is_optimal());
        assert_abs_diff_eq!(r.decision.x[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(r.optimal_value, -0.2, epsilon = 1e-8);
    }

    #[test]
    fn saa_is_permutation_invariant() {
        let s = fixture();
        let perm: Vec<Vec<f64>> = s.rows().map(|r| vec![r[2], r[0], r[1]]).collect();
        let sp = SampleSet::from_rows(&perm).unwrap();
        let a = solve_saa(&s, &risk(10.0, 0.2)).unwrap();
        let b = solve_saa(&sp, &risk(10.0, 0.2)).unwrap();
        assert_abs_diff_eq!(a.optimal_value, b.optimal_value, epsilon = 1e-8);
    }

    #[test]
    fn zero_radius_reduces_to_saa() {
        let s = fixture();
        let r = risk(10.0, 0.2);
        let saa = solve_saa(&s, &r).unwrap();
        for p in [1, 2] {
            let a = solve_wdroa(&s, &r, &full(p, 0.0, true)).unwrap();
            let b = solve_wdros(&s, &r, &full(p, 0.0, false)).unwrap();
            assert_abs_diff_eq!(a.optimal_value, saa.optimal_value, epsilon = 1e-9);
            assert_abs_diff_eq!(b.optimal_value, saa.optimal_value, epsilon = 1e-9);
            assert_abs_diff_eq!(a.decision.tau, saa.decision.tau, epsilon = 1e-9);
        }
    }

    #[test]
    fn huge_radius_gives_equal_weights() {
        let s = fixture();
        let r = solve_wdroa(&s, &risk(10.0, 0.2), &full(2, 100.0, true)).unwrap();
        for &w in &r.decision.x {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn wrong_flag_or_config_is_rejected() {
        let s = fixture();
        let r = risk(10.0, 0.2);
        assert!(solve_wdroa(&s, &r, &full(2, 0.1, false)).is_err());
        assert!(solve_wdros(&s, &r, &full(2, 0.1, true)).is_err());
        let bad = AmbiguitySpec::new(2, NormIndex::One, 0.1, SupportSpec::LimitedLoss, false).unwrap();
        assert!(matches!(solve_wdros(&s, &r, &bad), Err(Error::UnsupportedConfiguration(_))));
        let bad = AmbiguitySpec::new(3, NormIndex::Two, 0.1, SupportSpec::FullSpace, true).unwrap();
        assert!(matches!(solve_wdroa(&s, &r, &bad), Err(Error::UnsupportedConfiguration(_))));
    }

    #[test]
    fn limited_loss_rejects_samples_below_minus_one() {
        let s = SampleSet::from_rows(&[vec![-1.2, 0.0]]).unwrap();
        let amb = AmbiguitySpec::new(1, NormIndex::One, 0.1, SupportSpec::LimitedLoss, true).unwrap();
        assert!(matches!(
            solve_wdroa(&s, &risk(1.0, 0.5), &amb),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn standard_below_decision_dependent() {
        let s = fixture();
        let r = risk(10.0, 0.2);
        for eps in [1e-3, 1e-2, 0.1, 0.5] {
            let a = solve_wdroa(&s, &r, &full(2, eps, true)).unwrap();
            let b = solve_wdros(&s, &r, &full(2, eps, false)).unwrap();
            assert!(b.optimal_value <= a.optimal_value + 1e-6, "eps {eps}: {} > {}", b.optimal_value, a.optimal_value);
            assert!(b.lambda_star.unwrap() > 0.0);
        }
    }

    #[test]
    fn closed_form_matches_optimum() {
        let s = fixture();
        let r = risk(10.0, 0.2);
        let amb = full(2, 0.05, true);
        let sol = solve_wdroa(&s, &r, &amb).unwrap();
        let v = wdroa_closed_form_value(&s, &r, &sol.decision, &amb).unwrap();
        assert_abs_diff_eq!(v, sol.optimal_value, epsilon = 1e-6);
    }

    #[test]
    fn closed_form_at_zero_radius_is_saa_objective() {
        let s = fixture();
        let r = risk(10.0, 0.2);
        let d = Decision::new(vec![0.2, 0.3, 0.5], 0.01);
        let v = wdroa_closed_form_value(&s, &r, &d, &full(2, 0.0, true)).unwrap();
        let mean = cvar_loss(&r).pushforward(&d, &s).unwrap().iter().sum::<f64>() / 5.0;
        assert_abs_diff_eq!(v, mean, epsilon = 1e-15);
        let v = wdroa_closed_form_value(&s, &r, &d, &full(2, 0.3, true)).unwrap();
        let gamma = cvar_loss(&r).lipschitz_norm(&d.x, NormIndex::Two);
        assert_abs_diff_eq!(v, mean + 0.3 * gamma, epsilon = 1e-12);
    }

    #[test]
    fn limited_loss_cap_value() {
        // rho = 10: the cap min_tau max(1 + 10 tau, 51 - 40 tau) = 11 at tau = 1.
        let cap = limited_loss_cap(&cvar_loss(&risk(10.0, 0.2)), 3).unwrap();
        assert_abs_diff_eq!(cap.optimal_value, 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cap.decision.tau, 1.0, epsilon = 1e-12);
        // Large radius: the capped value wins.
        let s = SampleSet::from_rows(&[vec![0.1, 0.2], vec![-0.1, 0.05]]).unwrap();
        let amb = AmbiguitySpec::new(1, NormIndex::One, 50.0, SupportSpec::LimitedLoss, true).unwrap();
        let sol = solve_wdroa(&s, &risk(10.0, 0.2), &amb).unwrap();
        assert_abs_diff_eq!(sol.optimal_value, 11.0, epsilon = 1e-9);
    }
}
