//! Distributionally robust solvers built on the conic layer.

mod portfolio;
mod variance;

pub use portfolio::{
    limited_loss_decision_dependent, limited_loss_standard, solve_saa, solve_wdroa, solve_wdros,
    wdroa_closed_form_value, SupportMultipliers,
};
pub use variance::{
    solve_variance_wdroa_linear, variance_wdroa_objective, worst_case_variance_dual_numeric,
    worst_case_variance_known_mean, VarianceEstimateInput,
};
