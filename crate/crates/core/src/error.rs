use thiserror::Error;

/// Errors produced by the solvers in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unphysical couplings: |V_plus| = {v_plus_abs} exceeds V = {v} (master equation not of Lindblad form)")]
    Unphysical { v: f64, v_plus_abs: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("integration stiffness failure: step size underflow (h = {h:e}) at t = {t}")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("integration exceeded the step budget of {max_steps} steps at t = {t}")]
    StepBudgetExceeded { t: f64, max_steps: usize },

    #[error("unclassifiable attractor: {reason}")]
    Unclassifiable {
        reason: String,
        report: Box<crate::meanfield::AttractorReport>,
    },

    #[error("steady state not reached within a time budget of {budget}: residual {residual:e}")]
    NotConverged { budget: f64, residual: f64 },

    #[error("degenerate Liouvillian kernel: second eigenvalue {second:e} lies within {tolerance:e} of zero")]
    DegenerateKernel { second: f64, tolerance: f64 },

    #[error("Liouville-space dimension {dimension} exceeds the memory budget of {limit}")]
    MemoryBudget { dimension: usize, limit: usize },

    #[error("correlations diverge: eigenvalue with real part {growth:e} over tau_max = {tau_max}")]
    Divergent { growth: f64, tau_max: f64 },

    #[error("correlation tail has not decayed (|c(tau_max)|/max|c| = {ratio:e}) and windowing is disabled")]
    UndecayedTail { ratio: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
