//! Worst-case variance over a Wasserstein ball, and the decision-dependent
//! minimum-variance portfolio for linear losses.

use crate::conic::{golden_section_min, solve, ConicProgram, SocConstraint};
use crate::error::{Error, Result};
use crate::transport::DiscreteDistribution1D;
use crate::types::{
    AmbiguitySpec, Decision, NormIndex, SampleSet, SolveResult, SolveStatus, SupportSpec,
    PROJECTION_TOL,
};

/// A scalar sample with a known mean `eta` and a type-2 radius `epsilon`.
#[derive(Debug, Clone)]
pub struct VarianceEstimateInput {
    atoms: DiscreteDistribution1D,
    eta: f64,
    epsilon: f64,
}

impl VarianceEstimateInput {
    pub fn new(atoms: DiscreteDistribution1D, eta: f64, epsilon: f64) -> Result<Self> {
        if !eta.is_finite() {
            return Err(Error::InvalidArgument(format!("eta must be finite, got {eta}")));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self { atoms, eta, epsilon })
    }

    pub fn atoms(&self) -> &DiscreteDistribution1D {
        &self.atoms
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Empirical mean.
    pub fn zbar(&self) -> f64 {
        self.atoms.mean()
    }

    /// Empirical second moment about the known mean.
    pub fn sigma2_hat(&self) -> f64 {
        self.centered_variance() + (self.zbar() - self.eta).powi(2)
    }

    /// Empirical variance about the empirical mean, `sigma2_hat - (zbar - eta)^2`,
    /// computed without the subtraction.
    pub fn centered_variance(&self) -> f64 {
        let zbar = self.zbar();
        self.atoms
            .atoms()
            .iter()
            .zip(self.atoms.weights())
            .map(|(z, w)| w * (z - zbar) * (z - zbar))
            .sum()
    }

    /// `|zbar - eta|`: the smallest radius whose ball contains a law with mean `eta`.
    pub fn mean_gap(&self) -> f64 {
        (self.zbar() - self.eta).abs()
    }

    fn check_radius(&self) -> Result<()> {
        let gap = self.mean_gap();
        if self.epsilon < gap {
            return Err(Error::InfeasibleRadius {
                epsilon: self.epsilon,
                gap,
            });
        }
        Ok(())
    }
}

/// `sup { E_Q[(zeta - eta)^2] : W_2(Q, P_N) <= eps, E_Q[zeta] = eta }`
/// `= (sqrt(sigma^2 - d^2) + sqrt(eps^2 - d^2))^2` with `d = zbar - eta`.
pub fn worst_case_variance_known_mean(inp: &VarianceEstimateInput) -> Result<f64> {
    inp.check_radius()?;
    let gap = inp.mean_gap();
    let spread = inp.centered_variance().sqrt();
    let reach = ((inp.epsilon - gap) * (inp.epsilon + gap)).max(0.0).sqrt();
    Ok((spread + reach).powi(2))
}

/// The same value from the one-dimensional dual
/// `inf_beta eps^2 + beta delta + sigma^2 + eps sqrt(beta^2 + 4 beta delta + 4 sigma^2)`
/// with `delta = eta - zbar`, minimized numerically.
///
/// The minimizer has the sign of `-delta`, so `|beta| = e^u - 1` with `u >= 0`
/// is searched by golden section; the objective is convex in `beta` and `beta(u)`
/// is monotone, so it is unimodal in `u`.
pub fn worst_case_variance_dual_numeric(inp: &VarianceEstimateInput) -> Result<f64> {
    inp.check_radius()?;
    let eps = inp.epsilon;
    let gap = inp.mean_gap();
    let v = inp.centered_variance();
    let sigma2 = v + gap * gap;
    // With beta >= 0 measured along the descent direction, beta delta = -beta gap
    // and Q = (beta - 2 gap)^2 + 4 v, a sum of nonnegative terms.
    let objective = |beta: f64| -> f64 {
        let q = (beta - 2.0 * gap).powi(2) + 4.0 * v;
        let root = eps * q.sqrt();
        let bg = beta * gap;
        // eps sqrt(Q) - beta gap cancels; rationalize with the factored numerator
        // eps^2 (beta - 2 gap)^2 - beta^2 gap^2 + 4 eps^2 v.
        let num = (beta * (eps - gap) - 2.0 * eps * gap) * (beta * (eps + gap) - 2.0 * eps * gap) + 4.0 * eps * eps * v;
        let den = root + bg;
        let tail = if den > 0.0 { num / den } else { root - bg };
        eps * eps + sigma2 + tail
    };
    let (_, value) = golden_section_min(|u| objective(u.exp_m1()), 0.0, 36.0, 1e-12);
    Ok(value)
}

/// Decision-dependent minimum-variance portfolio for the linear loss
/// `F(x, xi) = <x, xi>` with `p = q = 2`:
/// `min_{x in simplex} (std_N(<x, xi>) + eps ||x||_2)^2`.
///
/// The base is a sum of two norms of linear maps of `x`, so it is minimized as a
/// second-order cone program and squared. The reported value is re-evaluated
/// exactly at the returned portfolio. The standard deviation uses the `1/N`
/// normalization.
pub fn solve_variance_wdroa_linear(sample: &SampleSet, amb: &AmbiguitySpec) -> Result<SolveResult> {
    if !amb.decision_dependent {
        return Err(Error::InvalidArgument(
            "the variance solver expects a decision-dependent ambiguity set".into(),
        ));
    }
    if amb.p != 2 || amb.q != NormIndex::Two || amb.support != SupportSpec::FullSpace {
        return Err(Error::UnsupportedConfiguration(format!(
            "p = {}, q = {:?}, support = {:?}; the variance solver needs p = q = 2 on the full space",
            amb.p, amb.q, amb.support
        )));
    }
    crate::types::validate_sample(sample, &amb.support)?;
    let m = sample.dim();
    let n = sample.n_scenarios();
    let (t, u) = (m, m + 1);
    let mut prog = ConicProgram::new(m + 2);
    prog.set_objective(t, 1.0).set_objective(u, amb.epsilon);
    for j in 0..m {
        prog.set_bounds(j, 0.0, f64::INFINITY);
    }
    prog.add_eq((0..m).map(|j| (j, 1.0)).collect(), 1.0);

    let means: Vec<f64> = (0..m)
        .map(|j| sample.rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let scale = 1.0 / (n as f64).sqrt();
    let centered: Vec<Vec<(usize, f64)>> = sample
        .rows()
        .map(|r| (0..m).map(|j| (j, (r[j] - means[j]) * scale)).collect())
        .collect();
    prog.add_soc(SocConstraint {
        b: vec![0.0; centered.len()],
        a: centered,
        c: vec![(t, 1.0)],
        d: 0.0,
    });
    let xs: Vec<usize> = (0..m).collect();
    prog.add_norm_epigraph(&xs, 1.0, u);

    let sol = solve(&prog)?;
    let raw = Decision::new(sol.values[..m].to_vec(), 0.0);
    let (decision, status) = match raw.clone().projected(PROJECTION_TOL) {
        Some(d) => (d, SolveStatus::Optimal),
        None => (raw, SolveStatus::NumericalLimit),
    };
    let value = variance_wdroa_objective(sample, &decision.x, amb.epsilon)?;
    Ok(SolveResult {
        decision,
        optimal_value: value,
        status,
        solver_iterations: sol.iterations,
        lambda_star: None,
    })
}

/// `(std_N(<x, xi_i>) + eps ||x||_2)^2` at a fixed portfolio.
pub fn variance_wdroa_objective(sample: &SampleSet, x: &[f64], eps: f64) -> Result<f64> {
    let r = sample.project(x)?;
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((var.sqrt() + eps * NormIndex::Two.norm(x)).powi(2))
}
