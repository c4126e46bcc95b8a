//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by network construction, analysis, and simulation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),

    #[error("reaction {reaction} references unknown species `{name}`")]
    UnknownSpecies { reaction: usize, name: String },

    #[error("reaction {reaction} has nonpositive rate constant {rate}")]
    NonPositiveRate { reaction: usize, rate: f64 },

    #[error("invalid rate law on reaction {reaction}: {reason}")]
    InvalidRateLaw { reaction: usize, reason: String },

    #[error("state component {index} is negative ({value})")]
    NegativeState { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("plant matrix is not Hurwitz stable (max Re eigenvalue = {abscissa})")]
    NotHurwitz { abscissa: f64 },

    #[error("static gain is zero or system is near-singular: {0}")]
    NotOutputControllable(String),

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual})")]
    NewtonNoConvergence { iterations: usize, residual: f64 },

    #[error("Newton iteration converged to a non-positive point (min component {min_component})")]
    NewtonNonPositive { min_component: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("integration exceeded {0} accepted steps")]
    TooManySteps(usize),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("stochastic simulation error: {0}")]
    Stochastic(String),

    #[error("DSD compilation error: {0}")]
    Dsd(String),
}
