//! Piecewise-max-affine losses `F(x, tau, xi) = max_k (a_k <x, xi> + b_k tau)`
//! and the empirical risk functionals built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{dot, Decision, NormIndex, RiskConfig, SampleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseMaxAffineLoss {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PiecewiseMaxAffineLoss {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptyInput);
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("loss coefficients must be finite".into()));
        }
        Ok(Self { a, b })
    }

    /// `-<x, xi>`: the plain negative portfolio return.
    pub fn linear() -> Self {
        Self {
            a: vec![-1.0],
            b: vec![0.0],
        }
    }

    pub fn slopes(&self) -> &[f64] {
        &self.a
    }

    pub fn tau_coefficients(&self) -> &[f64] {
        &self.b
    }

    pub fn n_pieces(&self) -> usize {
        self.a.len()
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// True when every piece ignores tau.
    pub fn is_tau_free(&self) -> bool {
        self.b.iter().all(|&b| b == 0.0)
    }

    /// True when all pieces coincide up to tau terms that vanish, i.e. the loss
    /// is the single affine map `a <x, xi>`.
    pub fn is_linear(&self) -> bool {
        self.is_tau_free() && self.a.iter().all(|&a| a == self.a[0])
    }

    /// Loss as a function of the scalar portfolio return `r = <x, xi>`.
    pub fn evaluate_return(&self, r: f64, tau: f64) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a * r + b * tau)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn evaluate(&self, d: &Decision, xi: &[f64]) -> Result<f64> {
        if xi.len() != d.x.len() {
            return Err(Error::DimensionMismatch {
                expected: d.x.len(),
                got: xi.len(),
            });
        }
        Ok(self.evaluate_return(dot(&d.x, xi), d.tau))
    }

    /// Loss values `F(x, tau, xi_i)` for every scenario.
    pub fn pushforward(&self, d: &Decision, sample: &SampleSet) -> Result<Vec<f64>> {
        Ok(sample
            .project(&d.x)?
            .into_iter()
            .map(|r| self.evaluate_return(r, d.tau))
            .collect())
    }

    /// Lipschitz constant of `xi -> F(x, tau, xi)` with respect to `||.||_q`:
    /// the dual norm of `x` times the steepest slope.
    pub fn lipschitz_norm(&self, x: &[f64], q: NormIndex) -> f64 {
        q.dual().norm(x) * self.max_abs_slope()
    }
}

/// Mean-CVaR loss: `E[-<x,xi>] + rho CVaR_alpha(-<x,xi>)` written as a two-piece
/// max-affine function of `(x, tau)`.
pub fn cvar_loss(risk: &RiskConfig) -> PiecewiseMaxAffineLoss {
    let RiskConfig { rho, alpha } = *risk;
    PiecewiseMaxAffineLoss {
        a: vec![-1.0, -1.0 - rho / alpha],
        b: vec![rho, rho * (1.0 - 1.0 / alpha)],
    }
}

/// CVaR and VaR of the empirical law of `losses` at level `alpha`.
///
/// The tail of mass `alpha` is averaged exactly, splitting the boundary atom
/// when `alpha * N` is fractional. The returned VaR is the boundary atom, which
/// minimizes `tau + E[(L - tau)_+] / alpha`.
pub fn cvar_and_var(losses: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if losses.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite loss".into()));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let need = alpha * sorted.len() as f64;
    let mut taken = 0.0;
    let mut tail_sum = 0.0;
    let mut var = sorted[0];
    for &l in &sorted {
        let remaining = need - taken;
        if remaining <= 1e-12 {
            break;
        }
        let w = remaining.min(1.0);
        tail_sum += w * l;
        taken += w;
        var = l;
    }
    Ok((tail_sum / taken, var))
}

pub fn cvar_empirical(losses: &[f64], alpha: f64) -> Result<f64> {
    cvar_and_var(losses, alpha).map(|(cvar, _)| cvar)
}

/// Out-of-sample value of portfolio `x` with tau re-optimized on `eval_sample`:
/// `E[-<x,xi>] + rho CVaR_alpha(-<x,xi>)`. Also returns the optimal tau (the VaR).
pub fn portfolio_oos_objective(
    x: &[f64],
    eval_sample: &SampleSet,
    risk: &RiskConfig,
) -> Result<(f64, f64)> {
    let losses: Vec<f64> = eval_sample.project(x)?.into_iter().map(|r| -r).collect();
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    let (cvar, var) = cvar_and_var(&losses, risk.alpha)?;
    Ok((mean + risk.rho * cvar, var))
}

/// Out-of-sample value of `(x, tau)` with tau held at the sample-produced value.
pub fn comprehensive_oos_objective(
    d: &Decision,
    eval_sample: &SampleSet,
    risk: &RiskConfig,
) -> Result<f64> {
    let values = cvar_loss(risk).pushforward(d, eval_sample)?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn risk(rho: f64, alpha: f64) -> RiskConfig {
        RiskConfig::new(rho, alpha).unwrap()
    }

    #[test]
    fn cvar_coefficients() {
        let l = cvar_loss(&risk(10.0, 0.2));
        assert_abs_diff_eq!(l.slopes()[0], -1.0);
        assert_abs_diff_eq!(l.slopes()[1], -51.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.tau_coefficients()[0], 10.0);
        assert_abs_diff_eq!(l.tau_coefficients()[1], -40.0, epsilon = 1e-12);

        let l = cvar_loss(&risk(0.0, 0.5));
        assert_eq!(l.slopes(), &[-1.0, -1.0]);
        assert_eq!(l.tau_coefficients(), &[0.0, 0.0]);
        assert!(l.is_linear());

        let l = cvar_loss(&risk(1.0, 1.0));
        assert_eq!(l.slopes(), &[-1.0, -2.0]);
        assert_eq!(l.tau_coefficients(), &[1.0, 0.0]);
    }

    #[test]
    fn evaluate_examples() {
        let lin = PiecewiseMaxAffineLoss::new(vec![-1.0, -1.0], vec![0.0, 0.0]).unwrap();
        let d = Decision::new(vec![1.0, 0.0], 123.0);
        assert_abs_diff_eq!(lin.evaluate(&d, &[0.3, 9.0]).unwrap(), -0.3, epsilon = 1e-15);

        let l = cvar_loss(&risk(10.0, 0.2));
        let d = Decision::new(vec![0.5, 0.5], 0.0);
        assert_abs_diff_eq!(l.evaluate(&d, &[0.1, 0.1]).unwrap(), -0.1, epsilon = 1e-12);
        let d = Decision::new(vec![0.5, 0.5], 0.1);
        assert_abs_diff_eq!(l.evaluate(&d, &[0.1, 0.1]).unwrap(), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let l = PiecewiseMaxAffineLoss::linear();
        let d = Decision::new(vec![1.0, 0.0], 0.0);
        assert!(matches!(l.evaluate(&d, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lipschitz_examples() {
        let l = PiecewiseMaxAffineLoss::new(vec![-1.0, -3.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(l.lipschitz_norm(&[1.0, 0.0], NormIndex::Two), 3.0);
        let l = cvar_loss(&risk(10.0, 0.2));
        assert_abs_diff_eq!(l.lipschitz_norm(&[0.5, 0.5], NormIndex::One), 25.5, epsilon = 1e-12);
        let l = PiecewiseMaxAffineLoss::new(vec![-1.0, -1.0], vec![0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(l.lipschitz_norm(&[0.6, 0.8], NormIndex::Two), 1.0, epsilon = 1e-15);
    }

    /// Oracle: minimize tau + mean((L - tau)_+)/alpha over tau at the data points,
    /// which contain a minimizer of the piecewise-linear convex objective.
    fn cvar_by_tau_scan(losses: &[f64], alpha: f64) -> f64 {
        let n = losses.len() as f64;
        losses
            .iter()
            .map(|&t| t + losses.iter().map(|l| (l - t).max(0.0)).sum::<f64>() / (n * alpha))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn cvar_examples() {
        let losses: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_abs_diff_eq!(cvar_by_tau_scan(&losses, 0.2), 9.5, epsilon = 1e-12);
        let (cvar, var) = cvar_and_var(&losses, 0.2).unwrap();
        assert_abs_diff_eq!(cvar, 9.5, epsilon = 1e-12);
        assert_eq!(var, 9.0);
        assert_abs_diff_eq!(cvar_empirical(&losses, 1.0).unwrap(), 5.5, epsilon = 1e-12);
        assert_eq!(cvar_empirical(&[5.0], 0.3).unwrap(), 5.0);
    }

    #[test]
    fn cvar_errors() {
        assert!(matches!(cvar_empirical(&[], 0.5), Err(Error::EmptyInput)));
        assert!(matches!(cvar_empirical(&[1.0], 0.0), Err(Error::BadAlpha(_))));
        assert!(matches!(cvar_empirical(&[1.0], 1.5), Err(Error::BadAlpha(_))));
    }

    #[test]
    fn cvar_fractional_tail_and_ties() {
        // alpha * N = 2.5: worst two atoms in full plus half of the third.
        let losses = [0.0, 4.0, 1.0, 3.0, 2.0];
        let cvar = cvar_empirical(&losses, 0.5).unwrap();
        assert_abs_diff_eq!(cvar, (4.0 + 3.0 + 0.5 * 2.0) / 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cvar, cvar_by_tau_scan(&losses, 0.5), epsilon = 1e-12);
        let tied = [1.0, 2.0, 2.0, 2.0];
        assert_abs_diff_eq!(cvar_empirical(&tied, 0.6).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cvar_at_one_atom_is_max() {
        let losses = [0.3, -1.0, 2.5, 0.7];
        assert_eq!(cvar_empirical(&losses, 0.25).unwrap(), 2.5);
        assert_eq!(cvar_empirical(&losses, 0.1).unwrap(), 2.5);
    }

    #[test]
    fn portfolio_oos_examples() {
        let r = risk(3.0, 0.4);
        let single = SampleSet::from_rows(&[vec![0.2, -0.1]]).unwrap();
        let x = [0.25, 0.75];
        let ret = 0.25 * 0.2 - 0.75 * 0.1;
        let (v, t) = portfolio_oos_objective(&x, &single, &r).unwrap();
        assert_abs_diff_eq!(v, -ret * 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t, -ret, epsilon = 1e-15);

        let rows: Vec<Vec<f64>> = (1..=10).map(|k| vec![-f64::from(k), 7.0]).collect();
        let s = SampleSet::from_rows(&rows).unwrap();
        let (v, t) = portfolio_oos_objective(&[1.0, 0.0], &s, &risk(1.0, 0.2)).unwrap();
        assert_abs_diff_eq!(v, 15.0, epsilon = 1e-12);
        assert_eq!(t, 9.0);

        let (v, t) = portfolio_oos_objective(&[1.0, 0.0], &s, &risk(0.0, 0.2)).unwrap();
        assert_abs_diff_eq!(v, 5.5, epsilon = 1e-12);
        assert_eq!(t, 9.0);
    }

    #[test]
    fn comprehensive_matches_portfolio_at_var() {
        let r = risk(10.0, 0.2);
        let rows: Vec<Vec<f64>> = (0..17).map(|k| vec![(k as f64 * 0.37).sin() * 0.1, (k as f64).cos() * 0.05]).collect();
        let s = SampleSet::from_rows(&rows).unwrap();
        let x = vec![0.3, 0.7];
        let (v, t) = portfolio_oos_objective(&x, &s, &r).unwrap();
        let c = comprehensive_oos_objective(&Decision::new(x, t), &s, &r).unwrap();
        assert_abs_diff_eq!(c, v, epsilon = 1e-12);
    }

    #[test]
    fn comprehensive_with_zero_rho_ignores_tau() {
        let r = risk(0.0, 0.2);
        let s = SampleSet::from_rows(&[vec![0.1, 0.2], vec![-0.3, 0.05]]).unwrap();
        let x = vec![0.4, 0.6];
        let expected = -(0.4 * 0.1 + 0.6 * 0.2 + 0.4 * -0.3 + 0.6 * 0.05) / 2.0;
        for tau in [-5.0, 0.0, 3.3] {
            let c = comprehensive_oos_objective(&Decision::new(x.clone(), tau), &s, &r).unwrap();
            assert_abs_diff_eq!(c, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn comprehensive_three_scenarios_by_hand() {
        // rho = 10, alpha = 0.2: a = (-1, -51), b = (10, -40); x = (1, 0), tau = 0.05.
        let r = risk(10.0, 0.2);
        let s = SampleSet::from_rows(&[vec![0.1, 9.0], vec![-0.2, 9.0], vec![0.0, 9.0]]).unwrap();
        let d = Decision::new(vec![1.0, 0.0], 0.05);
        // r = 0.1: max(-0.1 + 0.5, -5.1 - 2) = 0.4
        // r = -0.2: max(0.2 + 0.5, 10.2 - 2) = 8.2
        // r = 0: max(0.5, -2) = 0.5
        let c = comprehensive_oos_objective(&d, &s, &r).unwrap();
        assert_abs_diff_eq!(c, (0.4 + 8.2 + 0.5) / 3.0, epsilon = 1e-12);
    }

    fn vec_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0..2.0f64, m)
    }

    proptest! {
        #[test]
        fn convex_in_xi(
            xi1 in vec_strategy(3),
            xi2 in vec_strategy(3),
            x in vec_strategy(3),
            tau in -1.0..1.0f64,
            theta in 0.0..1.0f64,
            rho in 0.0..20.0f64,
            alpha in 0.05..1.0f64,
        ) {
            let l = cvar_loss(&risk(rho, alpha));
            let d = Decision::new(x, tau);
            let mid: Vec<f64> = xi1.iter().zip(&xi2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
            let lhs = l.evaluate(&d, &mid).unwrap();
            let rhs = theta * l.evaluate(&d, &xi1).unwrap() + (1.0 - theta) * l.evaluate(&d, &xi2).unwrap();
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn lipschitz_bound_holds(
            xi in vec_strategy(4),
            zeta in vec_strategy(4),
            x in vec_strategy(4),
            tau in -1.0..1.0f64,
            rho in 0.0..20.0f64,
            alpha in 0.05..1.0f64,
            q in prop_oneof![Just(NormIndex::One), Just(NormIndex::Two), Just(NormIndex::Inf)],
        ) {
            let l = cvar_loss(&risk(rho, alpha));
            let gamma = l.lipschitz_norm(&x, q);
            let d = Decision::new(x, tau);
            let diff = (l.evaluate(&d, &xi).unwrap() - l.evaluate(&d, &zeta).unwrap()).abs();
            prop_assert!(diff <= gamma * q.distance(&xi, &zeta) + 1e-12 * (1.0 + diff));
        }

        #[test]
        fn comprehensive_bounds_portfolio(
            rows in proptest::collection::vec(vec_strategy(2), 1..20),
            w in 0.0..1.0f64,
            tau in -3.0..3.0f64,
            rho in 0.0..20.0f64,
            alpha in 0.05..1.0f64,
        ) {
            let r = risk(rho, alpha);
            let s = SampleSet::from_rows(&rows).unwrap();
            let x = vec![w, 1.0 - w];
            let (v, _) = portfolio_oos_objective(&x, &s, &r).unwrap();
            let c = comprehensive_oos_objective(&Decision::new(x, tau), &s, &r).unwrap();
            prop_assert!(c >= v - 1e-12 * (1.0 + v.abs()));
        }

        #[test]
        fn cvar_matches_tau_scan_and_is_monotone(
            losses in proptest::collection::vec(-5.0..5.0f64, 1..25),
            a1 in 0.01..1.0f64,
            a2 in 0.01..1.0f64,
        ) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let c_lo = cvar_empirical(&losses, lo).unwrap();
            let c_hi = cvar_empirical(&losses, hi).unwrap();
            prop_assert!(c_hi <= c_lo + 1e-12);
            prop_assert!((c_lo - cvar_by_tau_scan(&losses, lo)).abs() < 1e-9);
        }
    }
}
