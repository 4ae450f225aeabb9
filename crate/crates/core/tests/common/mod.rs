//! Independent oracles and fixture generators shared by the integration tests.
#![allow(dead_code)]

use ddro::conic::{solve, ConicProgram};
use ddro::losses::cvar_loss;
use ddro::rng::seeded_rng;
use ddro::transport::DiscreteDistribution1D;
use ddro::{Decision, RiskConfig, SampleSet};
use rand::Rng;

/// Random scenario matrix with entries uniform in `[lo, hi]`.
pub fn random_sample(rng: &mut impl Rng, n: usize, m: usize, lo: f64, hi: f64) -> SampleSet {
    let data: Vec<f64> = (0..n * m).map(|_| rng.random_range(lo..=hi)).collect();
    SampleSet::from_flat(data, n, m).unwrap()
}

/// Random point of the simplex (normalized exponentials).
pub fn random_simplex(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

pub fn rng(seed: u64) -> ddro::rng::StreamRng {
    seeded_rng(seed, 0)
}

/// Worst-case mean over the `p`-Wasserstein ball by the transport LP on a
/// uniform grid of `points` nodes over `[lo, hi]` (plus the atoms themselves):
/// `max sum pi_ig z_g` s.t. `sum_g pi_ig = w_i`, `sum pi_ig |a_i - z_g|^p <= eps^p`.
pub fn grid_transport_worst_mean(
    dist: &DiscreteDistribution1D,
    eps: f64,
    p: u32,
    lo: f64,
    hi: f64,
    points: usize,
) -> f64 {
    let mut grid: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    grid.extend(dist.atoms().iter().copied());
    let n = dist.len();
    let g = grid.len();
    let var = |i: usize, k: usize| i * g + k;
    let mut prog = ConicProgram::new(n * g);
    let mut budget = Vec::with_capacity(n * g);
    for (i, (&a, &w)) in dist.atoms().iter().zip(dist.weights()).enumerate() {
        for (k, &z) in grid.iter().enumerate() {
            prog.set_objective(var(i, k), -z);
            prog.set_bounds(var(i, k), 0.0, f64::INFINITY);
            budget.push((var(i, k), (a - z).abs().powi(p as i32)));
        }
        prog.add_eq((0..g).map(|k| (var(i, k), 1.0)).collect(), w);
    }
    prog.add_le(budget, eps.powi(p as i32));
    -solve(&prog).expect("grid transport LP").objective
}

/// `(1/N) sum_i F(x, tau, xi_i)` minimized over tau exactly (the objective is
/// convex piecewise linear in tau with breakpoints at the negated returns).
pub fn saa_objective_min_tau(sample: &SampleSet, risk: &RiskConfig, x: &[f64]) -> (f64, f64) {
    let loss = cvar_loss(risk);
    let returns = sample.project(x).unwrap();
    let mut best = (f64::INFINITY, 0.0);
    for &r in &returns {
        let tau = -r;
        let d = Decision::new(x.to_vec(), tau);
        let v = loss.pushforward(&d, sample).unwrap().iter().sum::<f64>() / returns.len() as f64;
        if v < best.0 {
            best = (v, tau);
        }
    }
    best
}

/// `min over x1 in {0, step, ..., 1}` of `f(x1, 1 - x1)`.
pub fn simplex_grid_min_2d(step: f64, mut f: impl FnMut(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let count = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, vec![]);
    for k in 0..=count {
        let x1 = k as f64 / count as f64;
        let x = [x1, 1.0 - x1];
        let v = f(&x);
        if v < best.0 {
            best = (v, x.to_vec());
        }
    }
    best
}
