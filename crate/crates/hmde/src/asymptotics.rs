//! Long-horizon solving and S-asymptotic periodicity analysis.
//!
//! Unbounded-interval statements are operationalized on a finite horizon
//! `H`: the solver chains unit subproblems (each taking the previous
//! terminal value as its initial condition), and the periodicity detector
//! classifies "S-asymptotically omega-periodic at tolerance eps over
//! horizon H" from windowed suprema of `|x(t + omega) - x(t)|`. A finite
//! computation can never verify the genuine limit, so the classification is
//! always qualified by the horizon and tolerance.

use crate::error::{Error, Result};
use crate::field::{FieldSpec, GrowthBound};
use crate::grid::TimeGrid;
use crate::integrator::StieltjesIntegrator;
use crate::ks::{compose_integrand, ks_integral};
use crate::path::{dist, norm, RegulatedPath};
use crate::solver::{residual, solve_forward, HmdeProblem, SolveReport, SolverOptions};

/// A problem template on a finite horizon, solved by chaining intervals of
/// length `chain_len`.
#[derive(Clone, Debug)]
pub struct HorizonProblem {
    pub x0: Vec<f64>,
    pub f: FieldSpec,
    pub h: FieldSpec,
    pub g: StieltjesIntegrator,
    grid: TimeGrid,
    chain_len: f64,
    pub options: ChainOptions,
}

/// Tolerances shared by every chain link.
#[derive(Clone, Debug)]
pub struct ChainOptions {
    pub point_tol: f64,
    pub point_max_iter: usize,
    pub sweep_tol: f64,
    pub max_sweeps: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            point_tol: 1e-12,
            point_max_iter: 500,
            sweep_tol: 1e-8,
            max_sweeps: 4,
        }
    }
}

impl HorizonProblem {
    /// `grid` spans the full horizon and must contain every chain boundary
    /// `t0 + k * chain_len` as an exact node; the horizon must be a positive
    /// multiple of `chain_len`.
    pub fn new(
        x0: Vec<f64>,
        f: FieldSpec,
        h: FieldSpec,
        g: StieltjesIntegrator,
        grid: TimeGrid,
        chain_len: f64,
    ) -> Result<Self> {
        if !(chain_len > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "chain length must be positive, got {chain_len}"
            )));
        }
        let full = grid.union(g.grid())?;
        let horizon = full.end() - full.start();
        let chains = horizon / chain_len;
        if (chains - chains.round()).abs() > 1e-9 || chains.round() < 1.0 {
            return Err(Error::InvalidProblem(format!(
                "horizon {horizon} is not a positive multiple of the chain length {chain_len}"
            )));
        }
        for k in 1..chains.round() as usize {
            let b = full.start() + k as f64 * chain_len;
            if full.node_index(b).is_none() {
                return Err(Error::InvalidProblem(format!(
                    "chain boundary {b} is not a grid node"
                )));
            }
        }
        Ok(Self {
            x0,
            f,
            h,
            g,
            grid,
            chain_len,
            options: ChainOptions::default(),
        })
    }

    pub fn with_options(mut self, options: ChainOptions) -> Self {
        self.options = options;
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn chain_len(&self) -> f64 {
        self.chain_len
    }

    pub fn horizon(&self) -> f64 {
        self.grid.end() - self.grid.start()
    }

    fn solver_options(&self, grid: TimeGrid) -> SolverOptions {
        SolverOptions {
            grid,
            point_tol: self.options.point_tol,
            point_max_iter: self.options.point_max_iter,
            sweep_tol: self.options.sweep_tol,
            max_sweeps: self.options.max_sweeps,
        }
    }

    /// The whole-horizon problem, used to assess the chained path.
    fn full_problem(&self) -> Result<HmdeProblem> {
        HmdeProblem::new(
            self.x0.clone(),
            self.f.clone(),
            self.h.clone(),
            self.g.clone(),
            self.solver_options(self.grid.clone()),
        )
    }
}

/// Solves sequentially on `[t0 + k L, t0 + (k+1) L]`, passing each terminal
/// value on as the next initial condition, and concatenates the pieces. The
/// junction values agree exactly by construction; the reported residual is
/// that of the assembled path in the whole-horizon equation.
pub fn chain_solve(hp: &HorizonProblem) -> Result<SolveReport> {
    let full_problem = hp.full_problem()?;
    let grid = full_problem.grid().clone();
    let g_full = hp.g.regrid_to(&grid)?;
    let times = grid.times();
    let n = times.len();
    let dim = hp.x0.len();
    let t0 = grid.start();
    let chains = (hp.horizon() / hp.chain_len).round() as usize;

    let mut value = vec![0.0; n * dim];
    let mut right = vec![0.0; n * dim];
    let mut point_iters = vec![0usize; n];
    let mut sweeps = 0usize;
    let mut modulus_samples = None;

    let mut x_init = hp.x0.clone();
    for k in 0..chains {
        let lo = if k == 0 {
            t0
        } else {
            t0 + k as f64 * hp.chain_len
        };
        let hi = if k + 1 == chains {
            grid.end()
        } else {
            t0 + (k + 1) as f64 * hp.chain_len
        };
        let lo = grid.times()[grid.node_index(lo).ok_or_else(|| Error::InvalidProblem(
            format!("chain boundary {lo} is not a grid node"),
        ))?];
        let sub_grid = grid.restrict(lo, hi)?;
        let sub_g = g_full.restrict(lo, hi)?;
        let sub = HmdeProblem::new(
            x_init.clone(),
            hp.f.clone(),
            hp.h.clone(),
            sub_g,
            hp.solver_options(sub_grid),
        )?;
        let report = solve_forward(&sub).map_err(|e| Error::ChainFailed {
            index: k,
            source: Box::new(e),
        })?;
        sweeps = sweeps.max(report.sweeps);
        modulus_samples = modulus_samples.or(report.modulus_samples);

        let sol = &report.solution;
        let offset = grid.node_index(lo).unwrap();
        let sub_n = sol.grid().len();
        for j in 0..sub_n {
            let dst = (offset + j) * dim..(offset + j + 1) * dim;
            // The junction node keeps the previous chain's value; the new
            // chain starts from exactly that value, so only its right limit
            // (and interior nodes) are written.
            if j > 0 || k == 0 {
                value[dst.clone()].copy_from_slice(sol.value_at_node(j));
            }
            right[dst].copy_from_slice(sol.right_at_node(j));
            point_iters[offset + j] += report.point_iters[j];
        }
        x_init = sol.value_at_node(sub_n - 1).to_vec();
    }

    let solution = RegulatedPath::from_nodes(grid, dim, value.clone(), value, right)?;
    let res = residual(&full_problem, &solution)?;
    if res > hp.options.sweep_tol {
        return Err(Error::ResidualFailure {
            residual: res,
            tol: hp.options.sweep_tol,
            sweeps,
        });
    }
    Ok(SolveReport {
        solution,
        residual: res,
        point_iters,
        sweeps,
        certificate: None,
        modulus_samples,
    })
}

/// One row of the bounded-solution diagnostic.
#[derive(Clone, Debug)]
pub struct BoundedConditionRow {
    pub radius: f64,
    /// Sup of the perturbation over grid times and sampled states in the ball.
    pub h_sup: f64,
    /// Integral of the majorant family at this radius over the horizon.
    pub m_integral: f64,
    /// `(h_sup + m_integral) / radius`; below one supports boundedness.
    pub ratio: f64,
}

/// Diagnostic report for the boundedness condition.
#[derive(Clone, Debug)]
pub struct BoundedConditionReport {
    pub rows: Vec<BoundedConditionRow>,
    pub any_below_one: bool,
}

/// Evaluates, for each candidate radius `N`, the normalized bound
/// `(sup |h| over the ball + integral of M(., N) dg) / N`. The state sample
/// set is documented and fixed: magnitudes `{0, N/4, N/2, 3N/4, N}` along
/// every signed coordinate axis and the signed normalized all-ones
/// direction. Requires a radius-indexed majorant family on the integrand.
pub fn bounded_condition_check(
    hp: &HorizonProblem,
    radii: &[f64],
) -> Result<BoundedConditionReport> {
    let m = match hp.f.bound() {
        Some(GrowthBound::Family(m)) => m.clone(),
        _ => {
            return Err(Error::MissingData(
                "boundedness check requires a radius-indexed majorant family".into(),
            ))
        }
    };
    let dim = hp.x0.len();
    let full = hp.grid.union(hp.g.grid())?;
    let g = hp.g.regrid_to(&full)?;
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = sign;
            directions.push(e);
        }
    }
    let ones = 1.0 / (dim as f64).sqrt();
    directions.push(vec![ones; dim]);
    directions.push(vec![-ones; dim]);

    let mut rows = Vec::with_capacity(radii.len());
    let mut out = vec![0.0; dim];
    for &radius in radii {
        let mut h_sup: f64 = 0.0;
        for &t in full.times() {
            for dir in &directions {
                for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let u: Vec<f64> = dir.iter().map(|d| d * radius * frac).collect();
                    hp.h.eval_into(t, &u, &mut out)?;
                    h_sup = h_sup.max(norm(&out));
                }
            }
        }
        let m_r = m.clone();
        let sampled = RegulatedPath::sample_scalar(full.clone(), |s| m_r(s, radius))?;
        let m_integral = ks_integral(&sampled, &g, full.start(), full.end())?[0];
        let ratio = (h_sup + m_integral) / radius;
        rows.push(BoundedConditionRow {
            radius,
            h_sup,
            m_integral,
            ratio,
        });
    }
    let any_below_one = rows.iter().any(|r| r.ratio < 1.0);
    Ok(BoundedConditionReport {
        rows,
        any_below_one,
    })
}

/// Windowed profile of `|x(t + omega) - x(t)|` over a path's horizon.
#[derive(Clone, Debug)]
pub struct SapProfile {
    pub omega: f64,
    pub sample_times: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Per-window suprema of the sampled gaps, windows in time order.
    pub window_sups: Vec<f64>,
    pub tol: f64,
    /// True when the final window's supremum is at most `tol`; always a
    /// horizon-and-tolerance qualified statement, never the genuine limit.
    pub is_sap: bool,
}

/// Default detector tolerance.
pub const SAP_DEFAULT_TOL: f64 = 1e-3;
/// Default number of analysis windows.
pub const SAP_DEFAULT_WINDOWS: usize = 8;

/// Samples `|x(t + omega) - x(t)|` at every grid node `t` with
/// `t + omega` inside the span (both the node values and the right limits,
/// so post-jump mismatches on left-continuous paths are seen), splits
/// `[start, end - omega]` into `windows` equal windows, and classifies the
/// path as S-asymptotically `omega`-periodic at tolerance `tol` iff the
/// final window's supremum is at most `tol`.
pub fn sap_profile(
    path: &RegulatedPath,
    omega: f64,
    windows: usize,
    tol: f64,
) -> Result<SapProfile> {
    let (start, end) = path.span();
    if !(omega > 0.0 && omega < end - start) {
        return Err(Error::InvalidProblem(format!(
            "omega must lie in (0, span), got {omega} for span {}",
            end - start
        )));
    }
    if windows == 0 {
        return Err(Error::InvalidProblem("need at least one window".into()));
    }
    let t_max = end - omega;
    let mut sample_times = Vec::new();
    let mut gaps = Vec::new();
    for (i, &t) in path.grid().times().iter().enumerate() {
        if t > t_max {
            break;
        }
        let ahead = path.eval(t + omega)?;
        let here = path.value_at_node(i);
        let mut gap = dist(&ahead, here);
        // Compare right limits too (post-jump mismatch), but only where the
        // shifted right limit exists inside the span.
        if t + omega < end {
            let (_, ahead_right) = path.one_sided_limits(t + omega)?;
            gap = gap.max(dist(&ahead_right, path.right_at_node(i)));
        }
        sample_times.push(t);
        gaps.push(gap);
    }
    let width = (t_max - start) / windows as f64;
    let mut window_sups = vec![0.0f64; windows];
    for (&t, &gap) in sample_times.iter().zip(&gaps) {
        let mut w = if width > 0.0 {
            ((t - start) / width) as usize
        } else {
            0
        };
        if w >= windows {
            w = windows - 1;
        }
        window_sups[w] = window_sups[w].max(gap);
    }
    let is_sap = window_sups.last().is_some_and(|&s| s <= tol);
    Ok(SapProfile {
        omega,
        sample_times,
        gaps,
        window_sups,
        tol,
        is_sap,
    })
}

/// Builds the piecewise-linear left-continuous path determined by a real
/// sequence: the value at each integer `n` is `a(n)`, the right limit there
/// is `a(n-1)`, and on `(n, n+1]` the path runs linearly into `a(n+1)`.
/// Bounded sequences with vanishing successive differences make it a
/// standing example of an S-asymptotically 1-periodic regulated function
/// that is not periodic.
pub fn generate_example_path(a: impl Fn(usize) -> f64, horizon: f64) -> Result<RegulatedPath> {
    if !(horizon > 1.0) {
        return Err(Error::InvalidProblem(format!(
            "horizon must exceed one, got {horizon}"
        )));
    }
    let whole = horizon.floor() as usize;
    let fractional = horizon - whole as f64 > 0.0;
    let mut times: Vec<f64> = (0..=whole).map(|n| n as f64).collect();
    if fractional {
        times.push(horizon);
    }
    let grid = TimeGrid::new(times)?;
    let n_nodes = grid.len();
    let mut left = vec![0.0; n_nodes];
    let mut value = vec![0.0; n_nodes];
    let mut right = vec![0.0; n_nodes];
    for n in 0..=whole {
        value[n] = a(n);
        left[n] = value[n];
        right[n] = if n == 0 { a(0) } else { a(n - 1) };
    }
    if fractional {
        let i = n_nodes - 1;
        // Value on the last partial piece (whole, horizon].
        let v = a(whole + 1) + (a(whole + 1) - a(whole.saturating_sub(1))) * (horizon - whole as f64 - 1.0);
        value[i] = v;
        left[i] = v;
        right[i] = v;
    } else {
        right[whole] = value[whole];
    }
    RegulatedPath::from_nodes(grid, 1, left, value, right)
}

/// Profile of the composed path `t -> p(t, x(t))`. The caller asserts that
/// `p` is uniformly S-asymptotically periodic on bounded sets; under that
/// hypothesis the composition with an S-asymptotically periodic `x` inherits
/// the property, which this check observes numerically.
pub fn composition_sap_check(
    p: &FieldSpec,
    x: &RegulatedPath,
    omega: f64,
    windows: usize,
    tol: f64,
) -> Result<SapProfile> {
    let composed = compose_integrand(p, x)?;
    sap_profile(&composed, omega, windows, tol)
}
