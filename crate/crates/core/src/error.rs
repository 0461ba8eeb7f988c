use thiserror::Error;

/// Errors produced by the pulse synthesis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pulse has {got} components but the configuration expects {expected}")]
    PulseLength { expected: usize, got: usize },

    #[error("pulse component f_{index} is not finite")]
    NonFinitePulse { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "constraint set is infeasible for N = {n_harmonics}: at least two harmonics are required"
    )]
    InfeasibleHarmonics { n_harmonics: usize },

    #[error("failed to bracket the minimal multiplier root in ({lo}, {hi}): S(lo) = {s_lo}, S(hi) = {s_hi}")]
    Bracketing {
        lo: f64,
        hi: f64,
        s_lo: f64,
        s_hi: f64,
    },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        iterate: Box<crate::problem::OptimizationResult>,
    },

    #[error("Newton iteration diverged at iteration {iteration} (residual {residual:e})")]
    Divergence { iteration: usize, residual: f64 },

    #[error("singular Newton system at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("unitarity drift {drift:e} exceeds budget at t/T = {time}")]
    UnitarityViolation { time: f64, drift: f64 },

    #[error(
        "sampling grid too coarse: {samples} samples per period (need an even number >= {min})"
    )]
    GridTooCoarse { samples: usize, min: usize },

    #[error(
        "eigenphase {phase} of the one-period propagator is too close to the branch cut at +-pi"
    )]
    BranchAmbiguity { phase: f64 },

    #[error("robustness trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
