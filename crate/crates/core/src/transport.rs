//! One-dimensional worst/best-case means over Wasserstein balls, and exact
//! discrete optimal-transport distances used to check the reformulations.
//!
//! For a scalar empirical law with mean `m`, radius `eps` and interval support
//! `[lo, hi]`:
//!
//! ```text
//! p = 1:            sup E = min(m + eps, hi)
//! p >= 1, hi = inf: sup E = m + eps
//! p > 1, hi < inf:  sup E = inf_{lam >= 0} lam eps^p + mean_i sup_{z <= hi} (z - lam |z - z_i|^p)
//! ```
//!
//! The last case has no closed form and is evaluated through the scalar dual.

use crate::conic::golden_section_min;
use crate::error::{Error, Result};
use crate::losses::PiecewiseMaxAffineLoss;
use crate::types::{Decision, NormIndex, SampleSet, SupportSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteDistribution1D {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        if let Some(i) = atoms.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Empirical law: equal weight on every atom.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    fn negated(&self) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| -a).collect(),
            weights: self.weights.clone(),
        }
    }
}

fn interval_of(support: &SupportSpec) -> (f64, f64) {
    match *support {
        SupportSpec::FullSpace => (f64::NEG_INFINITY, f64::INFINITY),
        SupportSpec::LimitedLoss => (-1.0, f64::INFINITY),
        SupportSpec::Interval1D { lo, hi } => (lo, hi),
    }
}

fn check_inputs(dist: &DiscreteDistribution1D, eps: f64, p: u32, lo: f64, hi: f64) -> Result<()> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be >= 0, got {eps}")));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("Wasserstein order must be >= 1".into()));
    }
    if let Some(&value) = dist.atoms.iter().find(|&&a| a < lo || a > hi) {
        return Err(Error::AtomOutsideSupport { value, lo, hi });
    }
    Ok(())
}

/// Supremum of the mean over the `p`-Wasserstein ball of radius `eps` around `dist`.
pub fn worst_case_mean_1d(
    dist: &DiscreteDistribution1D,
    eps: f64,
    p: u32,
    support: &SupportSpec,
) -> Result<f64> {
    let (lo, hi) = interval_of(support);
    check_inputs(dist, eps, p, lo, hi)?;
    let mean = dist.mean();
    if eps == 0.0 {
        return Ok(mean);
    }
    if p == 1 {
        return Ok((mean + eps).min(hi));
    }
    if hi == f64::INFINITY {
        return Ok(mean + eps);
    }
    Ok(dual_value(dist, eps, p, hi))
}

/// Infimum of the mean over the same ball.
pub fn best_case_mean_1d(
    dist: &DiscreteDistribution1D,
    eps: f64,
    p: u32,
    support: &SupportSpec,
) -> Result<f64> {
    let (lo, hi) = interval_of(support);
    let mirrored = SupportSpec::Interval1D { lo: -hi, hi: -lo };
    worst_case_mean_1d(&dist.negated(), eps, p, &mirrored).map(|v| -v)
}

/// Worst-case mean evaluated through the scalar dual
/// `inf_{lam >= 0} lam eps^p + sum_i w_i sup_{z in [z_i, hi]} (z - lam |z - z_i|^p)`
/// by golden-section search on `log lam`.
pub fn worst_case_mean_1d_dual(
    dist: &DiscreteDistribution1D,
    eps: f64,
    p: u32,
    support: &SupportSpec,
) -> Result<f64> {
    let (lo, hi) = interval_of(support);
    check_inputs(dist, eps, p, lo, hi)?;
    Ok(dual_value(dist, eps, p, hi))
}

/// `sup_{z in [z0, hi]} z - lam (z - z0)^p`; the sup over `z < z0` is never larger.
fn atom_supremum(z0: f64, lam: f64, p: u32, hi: f64) -> f64 {
    if p == 1 {
        return if lam >= 1.0 {
            z0
        } else if hi.is_finite() {
            z0 + (1.0 - lam) * (hi - z0)
        } else {
            f64::INFINITY
        };
    }
    if lam == 0.0 {
        return hi;
    }
    let pf = f64::from(p);
    let shift = (1.0 / (lam * pf)).powf(1.0 / (pf - 1.0));
    if z0 + shift <= hi {
        z0 + shift - lam * shift.powf(pf)
    } else {
        hi - lam * (hi - z0).powf(pf)
    }
}

fn dual_value(dist: &DiscreteDistribution1D, eps: f64, p: u32, hi: f64) -> f64 {
    let eps_p = eps.powi(p as i32);
    let objective = |lam: f64| -> f64 {
        lam * eps_p
            + dist
                .atoms
                .iter()
                .zip(&dist.weights)
                .map(|(&z, &w)| w * atom_supremum(z, lam, p, hi))
                .sum::<f64>()
    };
    let (_, best) = golden_section_min(|u| objective(u.exp()), -34.0, 34.0, 1e-11);
    if hi.is_finite() {
        best.min(objective(0.0))
    } else {
        best
    }
}

/// Exact `W_p` between two scalar discrete laws via the monotone (sorted) coupling.
pub fn discrete_wasserstein_p(
    mu: &DiscreteDistribution1D,
    nu: &DiscreteDistribution1D,
    p: u32,
) -> f64 {
    let sorted = |d: &DiscreteDistribution1D| {
        let mut pairs: Vec<(f64, f64)> = d.atoms.iter().copied().zip(d.weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    };
    let a = sorted(mu);
    let b = sorted(nu);
    let (mut i, mut j) = (0, 0);
    let (mut wa, mut wb) = (a[0].1, b[0].1);
    let mut cost = 0.0;
    while i < a.len() && j < b.len() {
        let w = wa.min(wb);
        cost += w * (a[i].0 - b[j].0).abs().powi(p as i32);
        wa -= w;
        wb -= w;
        if wa <= 1e-15 {
            i += 1;
            if i < a.len() {
                wa = a[i].1;
            }
        }
        if wb <= 1e-15 {
            j += 1;
            if j < b.len() {
                wb = b[j].1;
            }
        }
    }
    cost.max(0.0).powf(1.0 / f64::from(p))
}

/// Exact `W_p` with ground cost `||.||_q` between two equal-weight empirical
/// laws with the same number of atoms (optimal plans are permutations).
pub fn discrete_wasserstein_p_nd(
    mu_atoms: &SampleSet,
    nu_atoms: &SampleSet,
    p: u32,
    q: NormIndex,
) -> Result<f64> {
    let n = mu_atoms.n_scenarios();
    if n != nu_atoms.n_scenarios() {
        return Err(Error::AtomCountMismatch {
            left: n,
            right: nu_atoms.n_scenarios(),
        });
    }
    if mu_atoms.dim() != nu_atoms.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu_atoms.dim(),
            got: nu_atoms.dim(),
        });
    }
    let cost: Vec<Vec<f64>> = mu_atoms
        .rows()
        .map(|a| {
            nu_atoms
                .rows()
                .map(|b| q.distance(a, b).powi(p as i32))
                .collect()
        })
        .collect();
    let total = if n <= 7 {
        min_cost_by_permutation(&cost)
    } else {
        min_cost_assignment(&cost)
    };
    Ok((total / n as f64).max(0.0).powf(1.0 / f64::from(p)))
}

/// Enumerates all permutations (Heap's algorithm).
pub(crate) fn min_cost_by_permutation(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Hungarian algorithm with potentials, O(n^3).
pub(crate) fn min_cost_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if !used[col] {
                    let cur = cost[r - 1][col - 1] - u[r] - v[col];
                    if cur < minv[col] {
                        minv[col] = cur;
                        way[col] = col0;
                    }
                    if minv[col] < delta {
                        delta = minv[col];
                        col1 = col;
                    }
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|col| cost[owner[col] - 1][col - 1]).sum()
}

/// Both sides of the contraction inequality
/// `W_p(F#a, F#b) <= gamma_{x,F,q} W_p(a, b)` at a fixed decision.
pub fn check_lipschitz_contraction(
    sample_a: &SampleSet,
    sample_b: &SampleSet,
    loss: &PiecewiseMaxAffineLoss,
    decision: &Decision,
    p: u32,
    q: NormIndex,
) -> Result<(f64, f64)> {
    let push_a = DiscreteDistribution1D::uniform(loss.pushforward(decision, sample_a)?)?;
    let push_b = DiscreteDistribution1D::uniform(loss.pushforward(decision, sample_b)?)?;
    let lhs = discrete_wasserstein_p(&push_a, &push_b, p);
    let rhs = loss.lipschitz_norm(&decision.x, q) * discrete_wasserstein_p_nd(sample_a, sample_b, p, q)?;
    Ok((lhs, rhs))
}
