//! Regulated functions, Kurzweil-Stieltjes integration, and hybrid measure
//! differential equations.
//!
//! The crate represents regulated vector-valued functions by finitely many
//! node triples (left limit, value, right limit) with linear interpolation
//! in between, and integrators of bounded variation by a piecewise-linear
//! continuous part plus finitely many positive jumps. On that data model the
//! Kurzweil-Stieltjes integral has a closed form, which makes the solver for
//! the hybrid measure equation
//!
//! ```text
//! x(t) = x0 - h(t0, x(t0)) + h(t, x(t)) + integral from t0 to t of f(s, x(s)) dg(s)
//! ```
//!
//! deterministic and self-checking: a solution is accepted only when the
//! residual of the integral equation, recomputed from the exact path
//! operations, is below tolerance.
//!
//! Module map:
//! * [`grid`], [`path`], [`integrator`]: the data model (grids, regulated
//!   paths, nondecreasing left-continuous integrators).
//! * [`ks`]: the integration engine, the indefinite integral with its jump
//!   relations, a delta-fine tagged-partition oracle, and integrand
//!   composition.
//! * [`field`]: nonlinearity handles with declared growth bounds and
//!   contraction moduli.
//! * [`solver`]: the forward-marching solver, residuals, existence
//!   certificates, and the pointwise derivative formula.
//! * [`frontends`]: impulsive systems and dynamic equations on time scales
//!   encoded as measure problems.
//! * [`asymptotics`]: long-horizon chaining and the detector for
//!   S-asymptotically periodic behaviour.
//! * [`dependence`]: parameter-sequence experiments measuring continuous
//!   dependence of solutions.
//!
//! Everything is immutable after construction and all operations are pure,
//! so values can be shared freely across threads.

pub mod asymptotics;
pub mod dependence;
pub mod error;
pub mod field;
pub mod frontends;
pub mod grid;
pub mod integrator;
pub mod ks;
pub mod path;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use field::{ContractionModulus, FieldSpec, GrowthBound};
pub use grid::TimeGrid;
pub use integrator::StieltjesIntegrator;
pub use ks::{
    compose_integrand, dominated_convergence_check, fine_partition, fine_partition_oracle,
    indefinite_integral, ks_integral, ConvergenceReport, TaggedPartition,
};
pub use path::RegulatedPath;
pub use solver::{
    certificate_a, certificate_a_star, derivative_field, hybrid_part, implicit_point_solve,
    residual, solve_forward, volterra_part, CertificateResult, HmdeProblem, SolveReport,
    SolverOptions,
};
