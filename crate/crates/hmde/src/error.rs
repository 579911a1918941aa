//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building or operating on the data
/// model, integrating, or solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} lies outside the span [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("span mismatch: [{a_start}, {a_end}] vs [{b_start}, {b_end}]")]
    SpanMismatch {
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },

    /// Integration over a reversed interval is rejected rather than negated
    /// so that sign conventions cannot drift silently.
    #[error("reversed integration interval: c = {c} exceeds d = {d}")]
    ReversedInterval { c: f64, d: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid integrator: {0}")]
    InvalidIntegrator(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid frontend spec: {0}")]
    InvalidSpec(String),

    #[error("field returned a non-finite value at t = {t}, u = {state:?}")]
    NonFiniteField { t: f64, state: Vec<f64> },

    /// The pointwise fixed-point iteration stalled. Carries the last two
    /// iterates so the caller can see whether the contraction condition is
    /// violated numerically or the tolerance is simply too tight.
    #[error(
        "point iteration at t = {t} did not converge within {iters} steps \
         (last gap {gap:.3e}); the contraction condition may fail here"
    )]
    NonConvergence {
        t: f64,
        iters: usize,
        gap: f64,
        last: Vec<f64>,
        previous: Vec<f64>,
    },

    #[error(
        "residual {residual:.3e} above tolerance {tol:.3e} after {sweeps} sweeps; \
         refine the grid or loosen the tolerance"
    )]
    ResidualFailure {
        residual: f64,
        tol: f64,
        sweeps: usize,
    },

    #[error("contraction modulus failed validation: {0}")]
    InvalidModulus(String),

    #[error("growth bound failed validation: {0}")]
    InvalidBound(String),

    #[error("missing declared data: {0}")]
    MissingData(String),

    #[error("derivative undefined at t = {t}: {reason}")]
    DerivativeUndefined { t: f64, reason: String },

    #[error("matrix I - J is numerically singular at t = {t} (condition estimate {cond:.3e})")]
    SingularMatrix { t: f64, cond: f64 },

    #[error("condition violated for index k = {k} at t = {t}: {what}")]
    ConditionViolated { k: usize, t: f64, what: String },

    #[error("chain {index} failed: {source}")]
    ChainFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
