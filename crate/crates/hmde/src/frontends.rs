//! Impulsive systems and dynamic equations on time scales, encoded as
//! measure problems.
//!
//! An impulsive equation `[x - h(t,x)]' = f(t,x)` with state resets
//! `x(tau+) = x(tau) + I_j(x(tau))` becomes a measure problem whose
//! integrator is the identity plus a *unit* jump at each impulse time, with
//! the integrand overridden at those times to return the impulse map. The
//! jump contribution is then `I_j(x(tau))`, state-dependent as required,
//! while the integrator itself stays a fixed function; the strict-sum
//! convention (jumps counted on `[t0, t)`) means the state includes an
//! impulse only strictly after its time.
//!
//! A dynamic equation on a time scale becomes a measure problem through the
//! standard correspondence `g(t) = inf of the scale at or after t`: `g` is
//! nondecreasing and left-continuous, flat across gaps, with a jump equal to
//! the graininess at every right-scattered point. The transported integrand
//! evaluates the original one at the forward jump of the time argument, so
//! values strictly inside gaps never influence the solution.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::integrator::StieltjesIntegrator;
use crate::path::RegulatedPath;
use crate::solver::{HmdeProblem, SolverOptions};

/// Collision tolerance when inserting impulse times or scale endpoints into
/// a grid: distinct times closer than this are rejected.
pub const TIME_COLLISION_TOL: f64 = 1e-12;

/// State map `u -> R^n`, used for impulse jumps.
pub type StateMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// An impulsive problem: base data plus finitely many interior impulse
/// times with their jump maps `I_j` (the jump *amount* as a function of the
/// pre-impulse state).
pub struct ImpulsiveSpec {
    pub t0: f64,
    pub duration: f64,
    pub x0: Vec<f64>,
    pub f: FieldSpec,
    pub h: FieldSpec,
    impulses: Vec<(f64, StateMap)>,
}

impl ImpulsiveSpec {
    pub fn new(
        t0: f64,
        duration: f64,
        x0: Vec<f64>,
        f: FieldSpec,
        h: FieldSpec,
        impulses: Vec<(f64, StateMap)>,
    ) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let end = t0 + duration;
        let mut prev = f64::NEG_INFINITY;
        for &(tau, _) in &impulses {
            if !(tau > t0 && tau < end) {
                return Err(Error::InvalidSpec(format!(
                    "impulse time {tau} must lie strictly inside ({t0}, {end})"
                )));
            }
            if tau <= prev {
                return Err(Error::InvalidSpec(
                    "impulse times must be strictly increasing".into(),
                ));
            }
            if tau - prev < TIME_COLLISION_TOL {
                return Err(Error::InvalidSpec(format!(
                    "impulse times {prev} and {tau} collide within {TIME_COLLISION_TOL:e}"
                )));
            }
            prev = tau;
        }
        Ok(Self {
            t0,
            duration,
            x0,
            f,
            h,
            impulses,
        })
    }

    pub fn impulse_times(&self) -> Vec<f64> {
        self.impulses.iter().map(|(t, _)| *t).collect()
    }

    /// Scalar impulse convenience: wraps `u -> jump amount` maps.
    pub fn scalar_impulse(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> StateMap {
        Arc::new(move |u: &[f64], out: &mut [f64]| out[0] = f(u[0]))
    }
}

/// Encodes an impulsive problem as a measure problem on the given options'
/// grid. Impulse times not already on the grid are inserted; times that
/// collide with existing nodes within [`TIME_COLLISION_TOL`] are an error.
pub fn from_impulsive(spec: &ImpulsiveSpec, options: SolverOptions) -> Result<HmdeProblem> {
    let end = spec.t0 + spec.duration;
    let base_grid = &options.grid;
    if base_grid.start() != spec.t0 || (base_grid.end() - end).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!(
            "options grid [{}, {}] does not span [{}, {end}]",
            base_grid.start(),
            base_grid.end(),
            spec.t0
        )));
    }
    let times = spec.impulse_times();
    let grid = base_grid.refine_with(&times, TIME_COLLISION_TOL)?;

    // Identity continuous part plus a unit jump at each impulse time; the
    // integrand override at that time supplies the state-dependent value.
    let jumps: Vec<(f64, f64)> = times.iter().map(|&t| (t, 1.0)).collect();
    let g = StieltjesIntegrator::new(grid.clone(), grid.times().to_vec(), &jumps)?;

    let mut f = spec.f.clone();
    for (tau, map) in &spec.impulses {
        let map = map.clone();
        f = f.with_override(
            *tau,
            Arc::new(move |_t, u: &[f64], out: &mut [f64]| map(u, out)),
        );
    }

    let options = SolverOptions { grid, ..options };
    HmdeProblem::new(spec.x0.clone(), f, spec.h.clone(), g, options)
}

/// A time scale given as finitely many disjoint closed components (isolated
/// points are degenerate intervals), sorted, spanning `[t0, t0 + duration]`.
pub struct TimeScaleSpec {
    components: Vec<(f64, f64)>,
    pub x0: Vec<f64>,
    pub f: FieldSpec,
    pub h: FieldSpec,
}

impl TimeScaleSpec {
    pub fn new(
        components: Vec<(f64, f64)>,
        x0: Vec<f64>,
        f: FieldSpec,
        h: FieldSpec,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidSpec("time scale must be nonempty".into()));
        }
        for &(lo, hi) in &components {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(Error::InvalidSpec(format!(
                    "degenerate component [{lo}, {hi}]"
                )));
            }
        }
        for w in components.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(Error::InvalidSpec(format!(
                    "components [{}, {}] and [{}, {}] are not disjoint and sorted",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        let span = components.last().unwrap().1 - components[0].0;
        if !(span > 0.0) {
            return Err(Error::InvalidSpec(
                "time scale must span a nondegenerate interval".into(),
            ));
        }
        Ok(Self {
            components,
            x0,
            f,
            h,
        })
    }

    /// Discrete scale made of isolated points.
    pub fn from_points(
        points: &[f64],
        x0: Vec<f64>,
        f: FieldSpec,
        h: FieldSpec,
    ) -> Result<Self> {
        Self::new(points.iter().map(|&p| (p, p)).collect(), x0, f, h)
    }

    pub fn t0(&self) -> f64 {
        self.components[0].0
    }

    pub fn t_end(&self) -> f64 {
        self.components.last().unwrap().1
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn contains(&self, t: f64) -> bool {
        self.components.iter().any(|&(lo, hi)| t >= lo && t <= hi)
    }

    /// Forward jump: the smallest scale point at or after `t`.
    pub fn forward_jump(&self, t: f64) -> Result<f64> {
        if t < self.t0() || t > self.t_end() {
            return Err(Error::OutOfDomain {
                t,
                start: self.t0(),
                end: self.t_end(),
            });
        }
        for &(lo, hi) in &self.components {
            if t <= hi {
                return Ok(if t >= lo { t } else { lo });
            }
        }
        Ok(self.t_end())
    }

    /// Graininess at a scale point: distance to the next scale point (zero
    /// at right-dense points).
    pub fn graininess(&self, t: f64) -> Result<f64> {
        if !self.contains(t) {
            return Err(Error::InvalidSpec(format!("{t} is not a scale point")));
        }
        for (i, &(_, hi)) in self.components.iter().enumerate() {
            if t == hi && i + 1 < self.components.len() {
                return Ok(self.components[i + 1].0 - hi);
            }
        }
        Ok(0.0)
    }
}

/// Encodes a dynamic equation on a time scale as a measure problem: the
/// integrator is the forward-jump function of the scale and the integrand
/// evaluates the original one at the forward jump of its time argument.
/// Restricted to scale points, solutions of the resulting problem satisfy
/// the scale's integral equation; across gaps they are constant.
pub fn from_timescale(spec: &TimeScaleSpec, options: SolverOptions) -> Result<HmdeProblem> {
    let (t0, end) = (spec.t0(), spec.t_end());
    let base_grid = &options.grid;
    if base_grid.start() != t0 || (base_grid.end() - end).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!(
            "options grid [{}, {}] does not span [{t0}, {end}]",
            base_grid.start(),
            base_grid.end()
        )));
    }
    // Grid must contain every component endpoint.
    let mut endpoints = Vec::new();
    for &(lo, hi) in spec.components() {
        endpoints.push(lo);
        if hi > lo {
            endpoints.push(hi);
        }
    }
    let grid = base_grid.refine_with(&endpoints, TIME_COLLISION_TOL)?;

    // Continuous part: slope one inside scale components, flat across gaps.
    // Jumps: graininess at every right-scattered point.
    let times = grid.times();
    let mut cont = Vec::with_capacity(times.len());
    let mut acc = t0;
    cont.push(acc);
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if spec.contains(mid) {
            acc += b - a;
        }
        cont.push(acc);
    }
    let mut jumps = Vec::new();
    for w in spec.components().windows(2) {
        let scattered = w[0].1;
        jumps.push((scattered, w[1].0 - scattered));
    }
    let g = StieltjesIntegrator::new(grid.clone(), cont, &jumps)?;

    // Transported integrand: evaluate f at the forward jump of the time.
    let inner = spec.f.clone();
    let components: Vec<(f64, f64)> = spec.components().to_vec();
    let star = move |t: f64| -> f64 {
        for &(lo, hi) in &components {
            if t <= hi {
                return if t >= lo { t } else { lo };
            }
        }
        components.last().unwrap().1
    };
    let dim = spec.f.dim();
    let f_star = FieldSpec::new(
        dim,
        Arc::new(move |t: f64, u: &[f64], out: &mut [f64]| {
            // Errors surface when the composed path is evaluated.
            let _ = inner.eval_base_into(star(t), u, out);
        }),
    );

    let options = SolverOptions { grid, ..options };
    HmdeProblem::new(spec.x0.clone(), f_star, spec.h.clone(), g, options)
}

/// A sampled view of a solution: `(time, state)` rows, plus the per-impulse
/// jump amounts for impulsive problems.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionTable {
    pub rows: Vec<(f64, Vec<f64>)>,
    pub jumps: Vec<(f64, Vec<f64>)>,
}

/// Restricts a solution path to the scale points of `spec` (grid nodes that
/// lie on the scale).
pub fn restrict_to_timescale(path: &RegulatedPath, spec: &TimeScaleSpec) -> Result<SolutionTable> {
    if path.span() != (spec.t0(), spec.t_end()) {
        let (a_start, a_end) = path.span();
        return Err(Error::SpanMismatch {
            a_start,
            a_end,
            b_start: spec.t0(),
            b_end: spec.t_end(),
        });
    }
    let mut rows = Vec::new();
    for (i, &t) in path.grid().times().iter().enumerate() {
        if spec.contains(t) {
            rows.push((t, path.value_at_node(i).to_vec()));
        }
    }
    Ok(SolutionTable {
        rows,
        jumps: Vec::new(),
    })
}

/// Samples a solution path at its grid nodes and reports the realized state
/// jump at every impulse time.
pub fn restrict_impulsive(path: &RegulatedPath, spec: &ImpulsiveSpec) -> Result<SolutionTable> {
    if path.span() != (spec.t0, spec.t0 + spec.duration) {
        let (a_start, a_end) = path.span();
        return Err(Error::SpanMismatch {
            a_start,
            a_end,
            b_start: spec.t0,
            b_end: spec.t0 + spec.duration,
        });
    }
    let rows = path
        .grid()
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, path.value_at_node(i).to_vec()))
        .collect();
    let mut jumps = Vec::new();
    for tau in spec.impulse_times() {
        let (_, right) = path.one_sided_limits(tau)?;
        let value = path.eval(tau)?;
        jumps.push((
            tau,
            right.iter().zip(&value).map(|(r, v)| r - v).collect(),
        ));
    }
    Ok(SolutionTable { rows, jumps })
}
