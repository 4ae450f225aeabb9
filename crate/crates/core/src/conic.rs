//! Linear objective with linear and second-order-cone constraints, plus the
//! backend that solves it.
//!
//! Every reformulation in [`crate::dro`] is expressed as a [`ConicProgram`]:
//!
//! ```text
//! minimize    c'v
//! subject to  a_e'v  = b_e            (equalities)
//!             a_i'v <= b_i            (inequalities)
//!             ||A_k v + b_k||_2 <= c_k'v + d_k
//!             lo <= v <= hi
//! ```
//!
//! The backend is Clarabel, a pure-Rust interior-point solver. Nothing outside
//! this module touches it.

use std::fmt;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use thiserror::Error;

/// Sparse row: `(variable index, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub row: SparseRow,
    pub rhs: f64,
}

/// `||A v + b||_2 <= c'v + d`, with `A` given row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub a: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub c: SparseRow,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    n_vars: usize,
    objective: Vec<f64>,
    eq_constraints: Vec<LinearConstraint>,
    ineq_constraints: Vec<LinearConstraint>,
    soc_constraints: Vec<SocConstraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("program is infeasible")]
    Infeasible,
    #[error("program is unbounded")]
    Unbounded,
    #[error("solver stopped before reaching the requested accuracy: {0}")]
    NumericalLimit(String),
    #[error("malformed program: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

impl ConicProgram {
    /// All variables free, zero objective.
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            soc_constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eq_constraints(&self) -> &[LinearConstraint] {
        &self.eq_constraints
    }

    pub fn ineq_constraints(&self) -> &[LinearConstraint] {
        &self.ineq_constraints
    }

    pub fn soc_constraints(&self) -> &[SocConstraint] {
        &self.soc_constraints
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn set_objective(&mut self, j: usize, coeff: f64) -> &mut Self {
        self.objective[j] = coeff;
        self
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) -> &mut Self {
        self.eq_constraints.push(LinearConstraint { row, rhs });
        self
    }

    /// `row . v <= rhs`
    pub fn add_le(&mut self, row: SparseRow, rhs: f64) -> &mut Self {
        self.ineq_constraints.push(LinearConstraint { row, rhs });
        self
    }

    pub fn add_soc(&mut self, soc: SocConstraint) -> &mut Self {
        self.soc_constraints.push(soc);
        self
    }

    /// `||(v_j)_{j in vars}||_2 <= v_t`
    pub fn add_norm_epigraph(&mut self, vars: &[usize], scale: f64, t: usize) -> &mut Self {
        self.add_soc(SocConstraint {
            a: vars.iter().map(|&j| vec![(j, scale)]).collect(),
            b: vec![0.0; vars.len()],
            c: vec![(t, 1.0)],
            d: 0.0,
        })
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> &mut Self {
        self.lower[j] = lo;
        self.upper[j] = hi;
        self
    }

    /// Value of the objective at `v`.
    pub fn evaluate_objective(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    /// Largest constraint violation at `v` (0 when feasible).
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let dot = |row: &SparseRow| row.iter().map(|&(j, c)| c * v[j]).sum::<f64>();
        let mut worst = 0.0_f64;
        for con in &self.eq_constraints {
            worst = worst.max((dot(&con.row) - con.rhs).abs());
        }
        for con in &self.ineq_constraints {
            worst = worst.max(dot(&con.row) - con.rhs);
        }
        for soc in &self.soc_constraints {
            let lhs = soc
                .a
                .iter()
                .zip(&soc.b)
                .map(|(r, b)| (dot(r) + b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(lhs - dot(&soc.c) - soc.d);
        }
        for ((x, lo), hi) in v.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(lo - x).max(x - hi);
        }
        worst
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.objective.len() != self.n_vars {
            return Err(SolverError::Malformed("objective length".into()));
        }
        let check_row = |row: &SparseRow| -> Result<(), SolverError> {
            for &(j, c) in row {
                if j >= self.n_vars {
                    return Err(SolverError::Malformed(format!("variable index {j} out of range")));
                }
                if !c.is_finite() {
                    return Err(SolverError::Malformed(format!("non-finite coefficient on v{j}")));
                }
            }
            Ok(())
        };
        for con in self.eq_constraints.iter().chain(&self.ineq_constraints) {
            check_row(&con.row)?;
            if !con.rhs.is_finite() {
                return Err(SolverError::Malformed("non-finite right-hand side".into()));
            }
        }
        for soc in &self.soc_constraints {
            if soc.a.len() != soc.b.len() || soc.a.is_empty() {
                return Err(SolverError::Malformed("cone dimensions".into()));
            }
            soc.a.iter().try_for_each(check_row)?;
            check_row(&soc.c)?;
            if !soc.d.is_finite() || soc.b.iter().any(|b| !b.is_finite()) {
                return Err(SolverError::Malformed("non-finite cone offset".into()));
            }
        }
        for j in 0..self.n_vars {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(SolverError::Malformed(format!("bounds of v{j}")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::Malformed("non-finite objective".into()));
        }
        Ok(())
    }
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

impl Triplets {
    fn push_row(&mut self, row: &SparseRow, sign: f64, rhs: f64) {
        let r = self.rhs.len();
        for &(j, c) in row {
            if c != 0.0 {
                self.rows.push(r);
                self.cols.push(j);
                self.vals.push(sign * c);
            }
        }
        self.rhs.push(rhs);
    }
}

fn push_cone(cones: &mut Vec<SupportedConeT<f64>>, cone: SupportedConeT<f64>) {
    use SupportedConeT::*;
    match (cones.last_mut(), cone) {
        (Some(ZeroConeT(a)), ZeroConeT(b)) => *a += b,
        (Some(NonnegativeConeT(a)), NonnegativeConeT(b)) => *a += b,
        (_, cone) => cones.push(cone),
    }
}

/// Gap and feasibility targets tried in order: a run that stalls short of the
/// tight target is repeated with the looser one before giving up.
const TOLERANCES: [f64; 2] = [1e-10, 1e-8];

/// Solves `prog` with an interior-point method (see [`TOLERANCES`]).
pub fn solve(prog: &ConicProgram) -> Result<ConicSolution, SolverError> {
    prog.validate()?;
    let n = prog.n_vars;
    let mut t = Triplets {
        rows: Vec::new(),
        cols: Vec::new(),
        vals: Vec::new(),
        rhs: Vec::new(),
    };
    let mut cones = Vec::new();

    // Clarabel form: A v + s = b, s in K.
    for con in &prog.eq_constraints {
        t.push_row(&con.row, 1.0, con.rhs);
        push_cone(&mut cones, SupportedConeT::ZeroConeT(1));
    }
    for con in &prog.ineq_constraints {
        t.push_row(&con.row, 1.0, con.rhs);
        push_cone(&mut cones, SupportedConeT::NonnegativeConeT(1));
    }
    for j in 0..n {
        if prog.lower[j].is_finite() {
            t.push_row(&vec![(j, 1.0)], -1.0, -prog.lower[j]);
            push_cone(&mut cones, SupportedConeT::NonnegativeConeT(1));
        }
        if prog.upper[j].is_finite() {
            t.push_row(&vec![(j, 1.0)], 1.0, prog.upper[j]);
            push_cone(&mut cones, SupportedConeT::NonnegativeConeT(1));
        }
    }
    for soc in &prog.soc_constraints {
        // s = (c'v + d, A v + b)
        t.push_row(&soc.c, -1.0, soc.d);
        for (row, b) in soc.a.iter().zip(&soc.b) {
            t.push_row(row, -1.0, *b);
        }
        cones.push(SupportedConeT::SecondOrderConeT(soc.a.len() + 1));
    }

    let m = t.rhs.len();
    let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
    let p = CscMatrix::zeros((n, n));
    let mut last = None;
    for tol in TOLERANCES {
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(200)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .max_threads(1)
            .build()
            .map_err(|e| SolverError::Malformed(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &prog.objective, &a, &t.rhs, &cones, settings)
            .map_err(|e| SolverError::Malformed(e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved => {
                return Ok(ConicSolution {
                    objective: prog.evaluate_objective(&sol.x),
                    values: sol.x.clone(),
                    iterations: sol.iterations,
                })
            }
            SolverStatus::PrimalInfeasible => return Err(SolverError::Infeasible),
            SolverStatus::DualInfeasible => return Err(SolverError::Unbounded),
            other => last = Some(other),
        }
    }
    match last {
        Some(SolverStatus::AlmostPrimalInfeasible) => Err(SolverError::Infeasible),
        Some(SolverStatus::AlmostDualInfeasible) => Err(SolverError::Unbounded),
        other => Err(SolverError::NumericalLimit(format!("{other:?}"))),
    }
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
///
/// Finds the minimizer of a unimodal `f` to within `tol`. For any `f`, the
/// returned pair is the best point actually evaluated.
pub fn golden_section_min<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut best = (a, f(a));
    let consider = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx < best.1 || best.1.is_nan() {
            *best = (x, fx);
        }
    };
    let fb = f(b);
    consider(b, fb, &mut best);

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    let tol = tol.max(0.0);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            if c == d {
                break;
            }
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            if c == d {
                break;
            }
            fd = f(d);
            consider(d, fd, &mut best);
        }
    }
    best
}

impl fmt::Display for ConicProgram {
    /// LP-style text dump for inspection.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn terms(row: &SparseRow) -> String {
            if row.is_empty() {
                return "0".to_string();
            }
            row.iter()
                .enumerate()
                .map(|(k, &(j, c))| {
                    let sign = if c < 0.0 { "- " } else if k > 0 { "+ " } else { "" };
                    format!("{sign}{} v{j}", c.abs())
                })
                .collect::<Vec<_>>()
                .join(" ")
        }
        let obj: SparseRow = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        writeln!(f, "minimize")?;
        writeln!(f, "  obj: {}", terms(&obj))?;
        writeln!(f, "subject to")?;
        for (k, con) in self.eq_constraints.iter().enumerate() {
            writeln!(f, "  e{k}: {} = {}", terms(&con.row), con.rhs)?;
        }
        for (k, con) in self.ineq_constraints.iter().enumerate() {
            writeln!(f, "  l{k}: {} <= {}", terms(&con.row), con.rhs)?;
        }
        for (k, soc) in self.soc_constraints.iter().enumerate() {
            let inner: Vec<String> = soc
                .a
                .iter()
                .zip(&soc.b)
                .map(|(r, b)| format!("{} + {b}", terms(r)))
                .collect();
            writeln!(f, "  q{k}: || {} || <= {} + {}", inner.join(" ; "), terms(&soc.c), soc.d)?;
        }
        writeln!(f, "bounds")?;
        for j in 0..self.n_vars {
            match (self.lower[j].is_finite(), self.upper[j].is_finite()) {
                (false, false) => writeln!(f, "  v{j} free")?,
                _ => writeln!(f, "  {} <= v{j} <= {}", self.lower[j], self.upper[j])?,
            }
        }
        writeln!(f, "end")
    }
}
