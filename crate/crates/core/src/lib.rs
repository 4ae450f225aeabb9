//! Wasserstein distributionally robust optimization with decision-dependent
//! ambiguity sets, specialized to piecewise-max-affine (mean-CVaR) losses.
//!
//! * [`dro`]: SAA, the standard formulation (ball around the scenario
//!   empirical) and the decision-dependent formulation (ball around the loss
//!   pushforward), plus the worst-case variance path.
//! * [`transport`]: scalar worst-case means and exact optimal-transport oracles.
//! * [`losses`]: the loss family, its Lipschitz constants, CVaR.
//! * [`conic`]: LP/SOCP representation and backend.
//! * [`bench`]: Monte Carlo experiment harness.

pub mod bench;
pub mod conic;
pub mod dro;
pub mod error;
pub mod losses;
pub mod rng;
pub mod transport;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_sample, AmbiguitySpec, Decision, NormIndex, RiskConfig, SampleSet, SolveResult,
    SolveStatus, SupportSpec,
};
