//! Domain types shared by every solver and the experiment harness.
//!
//! All reals are `f64`. Comparisons against solver output use the absolute
//! tolerance [`SOLVER_TOL`] unless stated otherwise.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for anything that comes back from the conic backend.
pub const SOLVER_TOL: f64 = 1e-8;

/// Largest simplex violation that is silently repaired by projection.
pub const PROJECTION_TOL: f64 = 1e-6;

/// N scenarios of an m-dimensional random vector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Vec<f64>,
    n: usize,
    m: usize,
}

impl SampleSet {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::EmptyInput);
        }
        let mut data = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        let sample = Self { data, n, m };
        sample.check_finite()?;
        Ok(sample)
    }

    pub fn from_flat(data: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: data.len(),
            });
        }
        let sample = Self { data, n, m };
        sample.check_finite()?;
        Ok(sample)
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(idx) => Err(Error::NonFinite {
                row: idx / self.m,
                col: idx % self.m,
            }),
            None => Ok(()),
        }
    }

    pub fn n_scenarios(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.m)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Keeps the scenarios at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.m);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(data, indices.len(), self.m)
    }

    /// Portfolio returns `<x, xi_i>` for every scenario.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: x.len(),
            });
        }
        Ok(self.rows().map(|r| dot(r, x)).collect())
    }

    /// Writes the scenario CSV format: header `xi_1,...,xi_m`, one scenario per line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record((1..=self.m).map(|j| format!("xi_{j}")))?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let m = r.headers()?.len();
        let mut data = Vec::new();
        let mut n = 0;
        for record in r.records() {
            let record = record?;
            if record.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: record.len(),
                });
            }
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("row {}: cannot parse {field:?} as a number", n + 1))
                })?;
                data.push(v);
            }
            n += 1;
        }
        Self::from_flat(data, n, m)
    }
}

/// The support Xi of the random vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SupportSpec {
    /// Xi = R^m.
    FullSpace,
    /// Xi = { xi >= -1 }: no asset loses more than its full value.
    LimitedLoss,
    /// A scalar interval, endpoints possibly infinite.
    Interval1D { lo: f64, hi: f64 },
}

impl SupportSpec {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "interval support needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self::Interval1D { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        match *self {
            SupportSpec::FullSpace => true,
            SupportSpec::LimitedLoss => v >= -1.0,
            SupportSpec::Interval1D { lo, hi } => v >= lo && v <= hi,
        }
    }
}

/// Index q of the ground-cost norm `||.||_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormIndex {
    One,
    Two,
    Inf,
}

impl NormIndex {
    /// Hölder conjugate index.
    pub fn dual(self) -> Self {
        match self {
            NormIndex::One => NormIndex::Inf,
            NormIndex::Two => NormIndex::Two,
            NormIndex::Inf => NormIndex::One,
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormIndex::One => v.iter().map(|a| a.abs()).sum(),
            NormIndex::Two => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            NormIndex::Inf => v.iter().fold(0.0, |acc, a| acc.max(a.abs())),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.norm(&diff)
    }
}

impl std::str::FromStr for NormIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "one" => Ok(NormIndex::One),
            "2" | "two" => Ok(NormIndex::Two),
            "inf" | "infinity" => Ok(NormIndex::Inf),
            other => Err(Error::InvalidArgument(format!("unknown norm index {other:?}"))),
        }
    }
}

/// Wasserstein ball parameters for one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    pub p: u32,
    pub q: NormIndex,
    pub epsilon: f64,
    pub support: SupportSpec,
    /// `false`: ball of radius eps around the scenario empirical (WDROS).
    /// `true`: ball of radius eps * gamma around the loss pushforward (WDROA).
    pub decision_dependent: bool,
}

impl AmbiguitySpec {
    pub fn new(
        p: u32,
        q: NormIndex,
        epsilon: f64,
        support: SupportSpec,
        decision_dependent: bool,
    ) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidArgument(format!("Wasserstein order must be >= 1, got {p}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("radius must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self {
            p,
            q,
            epsilon,
            support,
            decision_dependent,
        })
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }
}

/// Mean-CVaR risk preferences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub rho: f64,
    pub alpha: f64,
}

impl RiskConfig {
    pub fn new(rho: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::BadAlpha(alpha));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be finite and >= 0, got {rho}")));
        }
        Ok(Self { rho, alpha })
    }
}

/// A portfolio on the simplex together with the VaR surrogate tau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub x: Vec<f64>,
    pub tau: f64,
}

impl Decision {
    pub fn new(x: Vec<f64>, tau: f64) -> Self {
        Self { x, tau }
    }

    pub fn equally_weighted(m: usize, tau: f64) -> Self {
        Self {
            x: vec![1.0 / m as f64; m],
            tau,
        }
    }

    /// Largest violation of `x >= 0, sum x = 1`.
    pub fn simplex_violation(&self) -> f64 {
        let neg = self.x.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
        let sum: f64 = self.x.iter().sum();
        neg.max((sum - 1.0).abs())
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.tau.is_finite() && self.x.iter().all(|v| v.is_finite()) && self.simplex_violation() <= tol
    }

    /// Clips negatives and renormalizes when the violation is at most `tol`.
    /// Returns `None` for larger violations.
    pub fn projected(mut self, tol: f64) -> Option<Self> {
        if !self.x.iter().all(|v| v.is_finite()) || self.simplex_violation() > tol {
            return None;
        }
        for v in &mut self.x {
            *v = v.max(0.0);
        }
        let sum: f64 = self.x.iter().sum();
        if sum <= 0.0 {
            return None;
        }
        for v in &mut self.x {
            *v /= sum;
        }
        Some(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub decision: Decision,
    pub optimal_value: f64,
    pub status: SolveStatus,
    pub solver_iterations: u32,
    /// Outer dual multiplier when a lambda-search was used.
    pub lambda_star: Option<f64>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Checks finiteness and support membership of every scenario.
pub fn validate_sample(sample: &SampleSet, support: &SupportSpec) -> Result<()> {
    sample.check_finite()?;
    match support {
        SupportSpec::FullSpace => {}
        SupportSpec::Interval1D { .. } if sample.dim() != 1 => {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: sample.dim(),
            })
        }
        _ => {
            for (row, r) in sample.rows().enumerate() {
                if let Some(col) = r.iter().position(|&v| !support.contains(v)) {
                    return Err(Error::SupportViolation {
                        row,
                        col,
                        value: r[col],
                    });
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_accepts_finite_full_space() {
        let s = SampleSet::from_rows(&[vec![0.0, 0.0], vec![0.1, -0.2]]).unwrap();
        assert!(validate_sample(&s, &SupportSpec::FullSpace).is_ok());
    }

    #[test]
    fn validate_rejects_limited_loss_violation() {
        let s = SampleSet::from_rows(&[vec![-1.5, 0.0]]).unwrap();
        assert!(matches!(
            validate_sample(&s, &SupportSpec::LimitedLoss),
            Err(Error::SupportViolation { row: 0, col: 0, .. })
        ));
        let ok = SampleSet::from_rows(&[vec![-1.0, 3.0]]).unwrap();
        assert!(validate_sample(&ok, &SupportSpec::LimitedLoss).is_ok());
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(
            SampleSet::from_rows(&[vec![f64::NAN]]),
            Err(Error::NonFinite { row: 0, col: 0 })
        ));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(
            SampleSet::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn interval_requires_ordered_endpoints() {
        assert!(SupportSpec::interval(1.0, 1.0).is_err());
        assert!(SupportSpec::interval(f64::NEG_INFINITY, 0.0).is_ok());
    }

    #[test]
    fn risk_config_bounds() {
        assert!(RiskConfig::new(10.0, 0.2).is_ok());
        assert!(RiskConfig::new(1.0, 1.0).is_ok());
        assert!(matches!(RiskConfig::new(1.0, 0.0), Err(Error::BadAlpha(_))));
        assert!(RiskConfig::new(-1.0, 0.5).is_err());
    }

    #[test]
    fn dual_norms() {
        assert_eq!(NormIndex::One.dual(), NormIndex::Inf);
        assert_eq!(NormIndex::Inf.dual(), NormIndex::One);
        assert_eq!(NormIndex::Two.norm(&[3.0, 4.0]), 5.0);
        assert_eq!(NormIndex::Inf.norm(&[-3.0, 2.0]), 3.0);
    }

    #[test]
    fn projection_repairs_small_violations_only() {
        let d = Decision::new(vec![0.5 + 4e-7, 0.5, -1e-7], 0.0);
        let p = d.projected(PROJECTION_TOL).unwrap();
        assert!(p.simplex_violation() < 1e-15);
        assert!(p.x[2] == 0.0);
        let bad = Decision::new(vec![0.6, 0.5], 0.0);
        assert!(bad.projected(PROJECTION_TOL).is_none());
    }

    #[test]
    fn csv_round_trip() {
        let s = SampleSet::from_rows(&[vec![0.1, -0.2, 1e-17], vec![1.0 / 3.0, 2.5e8, -0.0]]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("xi_1,xi_2,xi_3\n"));
        let back = SampleSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }
}
