//! Continuous-dependence experiments: build a sequence of perturbed
//! problems, screen the hypotheses that the dependence theory needs, solve
//! every instance, and measure sup-norm convergence to the limit solution.
//!
//! The theory promises a convergent subsequence and gives no rate, so the
//! harness reports diagnostics rather than proofs: sampled convergence gaps
//! for the data, a randomized estimate of the uniform subdivision bound, a
//! sampled version of the modulus growth condition, and a monotone-trend
//! statistic over the measured solution gaps.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{ContractionModulus, FieldSpec, GrowthBound, ScalarMap};
use crate::ks::ks_integral;
use crate::path::{dist, norm};
use crate::rng::SplitMix64;
use crate::solver::{solve_forward, HmdeProblem};

/// A base (limit) problem plus generators for the perturbed data
/// `(f_k, h_k, x0_k)`, `k = 1..=k_max`. The integrator and solver options
/// are shared by every instance.
pub struct ParamSequence {
    pub base: HmdeProblem,
    pub k_max: usize,
    f_k: Arc<dyn Fn(usize) -> FieldSpec + Send + Sync>,
    h_k: Arc<dyn Fn(usize) -> FieldSpec + Send + Sync>,
    x0_k: Arc<dyn Fn(usize) -> Vec<f64> + Send + Sync>,
}

impl ParamSequence {
    pub fn new(
        base: HmdeProblem,
        k_max: usize,
        f_k: impl Fn(usize) -> FieldSpec + Send + Sync + 'static,
        h_k: impl Fn(usize) -> FieldSpec + Send + Sync + 'static,
        x0_k: impl Fn(usize) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidProblem("k_max must be positive".into()));
        }
        Ok(Self {
            base,
            k_max,
            f_k: Arc::new(f_k),
            h_k: Arc::new(h_k),
            x0_k: Arc::new(x0_k),
        })
    }

    /// The constant sequence: every instance repeats the base data.
    pub fn constant(base: HmdeProblem, k_max: usize) -> Result<Self> {
        let f = base.integrand().clone();
        let h = base.perturbation().clone();
        let x0 = base.x0().to_vec();
        Self::new(
            base,
            k_max,
            move |_| f.clone(),
            move |_| h.clone(),
            move |_| x0.clone(),
        )
    }

    /// The `k`-th perturbed problem, sharing the base integrator and options.
    pub fn instance(&self, k: usize) -> Result<HmdeProblem> {
        HmdeProblem::new(
            (self.x0_k)(k),
            (self.f_k)(k),
            (self.h_k)(k),
            self.base.integrator().clone(),
            self.base.options().clone(),
        )
    }

    pub fn integrand_at(&self, k: usize) -> FieldSpec {
        (self.f_k)(k)
    }

    pub fn perturbation_at(&self, k: usize) -> FieldSpec {
        (self.h_k)(k)
    }

    pub fn initial_at(&self, k: usize) -> Vec<f64> {
        (self.x0_k)(k)
    }
}

/// Number of uniform sample points used when scanning `t - phi_k(t)`.
pub const CONDITION_SAMPLES: usize = 1024;

/// Estimates the uniform-separation constant of a family of contraction
/// moduli on `[c, d]`: the minimum of `t - phi_k(t)` over all handles and a
/// dense uniform sample of the interval. A positive value is numerical
/// evidence that the family stays uniformly below the identity there; any
/// nonpositive sample is reported as a violation naming the handle and time.
pub fn condition_i_estimate(phis: &[ScalarMap], c: f64, d: f64) -> Result<f64> {
    if !(0.0 < c && c < d) {
        return Err(Error::InvalidProblem(format!(
            "need 0 < c < d, got c = {c}, d = {d}"
        )));
    }
    if phis.is_empty() {
        return Err(Error::InvalidProblem("empty modulus family".into()));
    }
    let mut min_sep = f64::INFINITY;
    for (k, phi) in phis.iter().enumerate() {
        for j in 0..=CONDITION_SAMPLES {
            let w = j as f64 / CONDITION_SAMPLES as f64;
            let t = c * (1.0 - w) + d * w;
            let sep = t - phi(t);
            if sep <= 0.0 {
                return Err(Error::ConditionViolated {
                    k: k + 1,
                    t,
                    what: format!("t - phi_k(t) = {sep} is not positive"),
                });
            }
            min_sep = min_sep.min(sep);
        }
    }
    Ok(min_sep)
}

/// Options for [`hypothesis_check`].
#[derive(Clone, Debug)]
pub struct HypothesisOptions {
    /// Radius of the state ball the convergence is sampled on. When unset,
    /// the base problem's certificate radius is used (falling back to one
    /// when no certificate is available).
    pub radius: Option<f64>,
    /// Number of low-discrepancy state samples.
    pub state_samples: usize,
    /// Randomized subdivision/assignment trials for the uniform bound.
    pub subdivision_trials: usize,
    pub seed: u64,
    /// Pass threshold for the sampled data gaps at the last index.
    pub tol: f64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self {
            radius: None,
            state_samples: 128,
            subdivision_trials: 256,
            seed: 0,
            tol: 1e-3,
        }
    }
}

/// Sampled evidence for the dependence hypotheses.
#[derive(Clone, Debug)]
pub struct HypothesisReport {
    /// `|x0_k - x0|` per index.
    pub initial_gaps: Vec<f64>,
    /// Sup over the sample set of `|h_k - h|` per index.
    pub perturbation_gaps: Vec<f64>,
    /// Sup over the sample set of `|f_k - f|` per index.
    pub integrand_gaps: Vec<f64>,
    /// Randomized-search estimate of the uniform subdivision bound on
    /// mixed-index majorant sums (an estimate, not a proof). Absent when an
    /// instance lacks a fixed majorant path.
    pub uniform_bound_estimate: Option<f64>,
    /// Per index, the sampled sup of `phi_k(r) / r` over radii at or above
    /// the reference radius. Absent when an instance lacks a fixed modulus.
    pub modulus_sup_ratios: Option<Vec<f64>>,
    pub initial_pass: bool,
    pub perturbation_pass: bool,
    pub integrand_pass: bool,
    /// Whether the tail of the sampled modulus ratios dips below one.
    pub modulus_pass: Option<bool>,
    pub options: HypothesisOptions,
}

/// Low-discrepancy points in the ball of the given radius (Kronecker
/// sequence per coordinate, plus the origin).
fn state_samples(dim: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    let alphas: Vec<f64> = (0..dim)
        .map(|i| PRIMES[i % PRIMES.len()].sqrt().fract())
        .collect();
    let mut samples = vec![vec![0.0; dim]];
    for j in 1..count {
        let mut u: Vec<f64> = (0..dim)
            .map(|i| 2.0 * ((j as f64) * alphas[i]).fract() - 1.0)
            .collect();
        let len = norm(&u);
        if len > 1.0 {
            for x in &mut u {
                *x /= len;
            }
        }
        for x in &mut u {
            *x *= radius;
        }
        samples.push(u);
    }
    samples
}

/// Samples the convergence of `(x0_k, h_k, f_k)` to the base data on a
/// documented `(t, u)` sample set, estimates the uniform subdivision bound
/// by randomized search, and samples the modulus growth condition at radii
/// at and above `options.radius`.
pub fn hypothesis_check(seq: &ParamSequence, options: HypothesisOptions) -> Result<HypothesisReport> {
    let base = &seq.base;
    let dim = base.dim();
    let radius = options.radius.unwrap_or_else(|| {
        crate::solver::certificate_a(base)
            .ok()
            .filter(|c| c.satisfied)
            .map_or(1.0, |c| c.radius)
    });
    let times: Vec<f64> = {
        let all = base.grid().times();
        let stride = (all.len() / 128).max(1);
        all.iter().step_by(stride).copied().collect()
    };
    let states = state_samples(dim, radius, options.state_samples);

    let mut initial_gaps = Vec::with_capacity(seq.k_max);
    let mut perturbation_gaps = Vec::with_capacity(seq.k_max);
    let mut integrand_gaps = Vec::with_capacity(seq.k_max);
    let mut out_a = vec![0.0; dim];
    let mut out_b = vec![0.0; dim];
    for k in 1..=seq.k_max {
        initial_gaps.push(dist(&seq.initial_at(k), base.x0()));
        let h_k = seq.perturbation_at(k);
        let f_k = seq.integrand_at(k);
        let mut h_sup: f64 = 0.0;
        let mut f_sup: f64 = 0.0;
        for &t in &times {
            for u in &states {
                h_k.eval_into(t, u, &mut out_a)?;
                base.perturbation().eval_into(t, u, &mut out_b)?;
                h_sup = h_sup.max(dist(&out_a, &out_b));
                f_k.eval_into(t, u, &mut out_a)?;
                base.integrand().eval_into(t, u, &mut out_b)?;
                f_sup = f_sup.max(dist(&out_a, &out_b));
            }
        }
        perturbation_gaps.push(h_sup);
        integrand_gaps.push(f_sup);
    }

    let uniform_bound_estimate =
        estimate_uniform_bound(seq, options.subdivision_trials, options.seed)?;
    let modulus_sup_ratios = sample_modulus_ratios(seq, radius);
    let modulus_pass = modulus_sup_ratios.as_ref().map(|ratios| {
        let tail = &ratios[ratios.len() / 2..];
        tail.iter().copied().fold(f64::INFINITY, f64::min) < 1.0
    });

    Ok(HypothesisReport {
        initial_pass: initial_gaps.last().is_some_and(|&g| g <= options.tol),
        perturbation_pass: perturbation_gaps.last().is_some_and(|&g| g <= options.tol),
        integrand_pass: integrand_gaps.last().is_some_and(|&g| g <= options.tol),
        initial_gaps,
        perturbation_gaps,
        integrand_gaps,
        uniform_bound_estimate,
        modulus_sup_ratios,
        modulus_pass,
        options,
    })
}

/// Max over random subdivisions and index assignments of the mixed sum of
/// majorant integrals. Returns `None` when any instance lacks a fixed
/// majorant path.
fn estimate_uniform_bound(
    seq: &ParamSequence,
    trials: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let mut majorant_integrals: Vec<Vec<f64>> = Vec::with_capacity(seq.k_max);
    let g = seq.base.integrator();
    let nodes = seq.base.grid().times().to_vec();
    for k in 1..=seq.k_max {
        let f_k = seq.integrand_at(k);
        let m = match f_k.bound() {
            Some(GrowthBound::Path(m)) => m.clone(),
            _ => return Ok(None),
        };
        // Per-cell majorant integrals, reused across trials.
        let mut cells = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            cells.push(ks_integral(&m, g, w[0], w[1])?[0]);
        }
        majorant_integrals.push(cells);
    }
    let n_cells = nodes.len() - 1;
    let mut rng = SplitMix64::new(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        // A subdivision is a set of cut indices; each block gets a random
        // instance index. Summing per-cell integrals inside a block equals
        // the block's majorant integral by additivity.
        let blocks = 1 + rng.below(8.min(n_cells));
        let mut cuts: Vec<usize> = (0..blocks - 1).map(|_| 1 + rng.below(n_cells - 1)).collect();
        cuts.push(0);
        cuts.push(n_cells);
        cuts.sort_unstable();
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let k = rng.below(seq.k_max);
            total += majorant_integrals[k][w[0]..w[1]].iter().sum::<f64>();
        }
        best = best.max(total);
    }
    Ok(Some(best))
}

/// Per index, `sup phi_k(r) / r` over a log-spaced radius sample at and
/// above `radius`. `None` when an instance lacks a fixed modulus.
fn sample_modulus_ratios(seq: &ParamSequence, radius: f64) -> Option<Vec<f64>> {
    let mut ratios = Vec::with_capacity(seq.k_max);
    for k in 1..=seq.k_max {
        let h_k = seq.perturbation_at(k);
        let phi = match h_k.modulus() {
            Some(ContractionModulus::Single(phi)) => phi.clone(),
            _ => return None,
        };
        let mut sup: f64 = 0.0;
        for j in 0..=64 {
            let r = radius * 10f64.powf(6.0 * j as f64 / 64.0);
            sup = sup.max(phi(r) / r);
        }
        ratios.push(sup);
    }
    Some(ratios)
}

/// One solved instance of the sequence.
#[derive(Clone, Debug)]
pub struct DependenceRow {
    pub k: usize,
    /// Sup-norm distance to the limit solution (NaN when unsolved).
    pub gap: f64,
    pub solved: bool,
}

/// Convergence table of a dependence run.
#[derive(Clone, Debug)]
pub struct DependenceTable {
    pub rows: Vec<DependenceRow>,
    /// Fraction of consecutive solved pairs with nonincreasing gaps.
    pub monotone_fraction: f64,
    pub base_residual: f64,
}

impl DependenceTable {
    /// Smallest solved gap at index at least `k_from`.
    pub fn min_gap_from(&self, k_from: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.solved && r.k >= k_from)
            .map(|r| r.gap)
            .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.min(g))))
    }
}

/// Solves the limit problem and every perturbed instance, measuring
/// `|x_k - x|` in sup norm. Individual solver failures are recorded in the
/// table and do not abort the run.
pub fn dependence_run(seq: &ParamSequence) -> Result<DependenceTable> {
    let base_report = solve_forward(&seq.base)?;
    let limit = &base_report.solution;
    let mut rows = Vec::with_capacity(seq.k_max);
    for k in 1..=seq.k_max {
        let solved = seq
            .instance(k)
            .and_then(|problem| solve_forward(&problem));
        match solved {
            Ok(report) => rows.push(DependenceRow {
                k,
                gap: report.solution.uniform_dist(limit)?,
                solved: true,
            }),
            Err(_) => rows.push(DependenceRow {
                k,
                gap: f64::NAN,
                solved: false,
            }),
        }
    }
    let mut pairs = 0usize;
    let mut monotone = 0usize;
    for w in rows.windows(2) {
        if w[0].solved && w[1].solved {
            pairs += 1;
            if w[1].gap <= w[0].gap {
                monotone += 1;
            }
        }
    }
    Ok(DependenceTable {
        rows,
        monotone_fraction: if pairs == 0 {
            1.0
        } else {
            monotone as f64 / pairs as f64
        },
        base_residual: base_report.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::integrator::StieltjesIntegrator;
    use crate::path::RegulatedPath;
    use crate::solver::SolverOptions;

    fn base_problem(cells: usize) -> HmdeProblem {
        let grid = TimeGrid::uniform(0.0, 1.0, cells).unwrap();
        let g = StieltjesIntegrator::identity(grid.clone());
        let m = RegulatedPath::constant(grid.clone(), &[1.0]).unwrap();
        let f = FieldSpec::scalar(|_, u: f64| u.cos()).with_bound_path(m);
        let h = FieldSpec::scalar(|_, u: f64| 0.25 * u)
            .with_modulus(Arc::new(|t: f64| 0.25 * t));
        HmdeProblem::new(vec![0.0], f, h, g, SolverOptions::new(grid)).unwrap()
    }

    #[test]
    fn condition_estimate_half_modulus() {
        let phis: Vec<ScalarMap> = (0..4).map(|_| Arc::new(|t: f64| 0.5 * t) as ScalarMap).collect();
        let sep = condition_i_estimate(&phis, 1.0, 2.0).unwrap();
        assert!((sep - 0.5).abs() < 1e-12);
    }

    #[test]
    fn condition_estimate_log_modulus() {
        // min over [1, 2] of t - log(1 + t)/2 is at t = 1 since the
        // derivative 1 - 1/(2(1+t)) stays positive.
        let phis: Vec<ScalarMap> = vec![Arc::new(|t: f64| 0.5 * (1.0 + t).ln())];
        let sep = condition_i_estimate(&phis, 1.0, 2.0).unwrap();
        let expect = 1.0 - 0.5 * 2f64.ln();
        assert!((sep - expect).abs() < 1e-12);
    }

    #[test]
    fn condition_estimate_flags_violations() {
        let phis: Vec<ScalarMap> = vec![Arc::new(|t: f64| t)];
        match condition_i_estimate(&phis, 1.0, 2.0) {
            Err(Error::ConditionViolated { k, .. }) => assert_eq!(k, 1),
            other => panic!("expected violation, got {other:?}"),
        }
        // Vanishing separation as the family index grows is visible in the
        // estimate computed per prefix of the family.
        let family: Vec<ScalarMap> = (1..=8)
            .map(|k| {
                let c = 1.0 - 1.0 / k as f64;
                Arc::new(move |t: f64| c * t) as ScalarMap
            })
            .collect();
        let mut prev = f64::INFINITY;
        for k_max in 1..=8 {
            let sep = condition_i_estimate(&family[..k_max], 1.0, 2.0).unwrap();
            assert!(sep <= prev);
            prev = sep;
        }
        assert!((prev - 1.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_check_constant_sequence() {
        let seq = ParamSequence::constant(base_problem(64), 6).unwrap();
        let report = hypothesis_check(&seq, HypothesisOptions::default()).unwrap();
        assert!(report.initial_gaps.iter().all(|&g| g == 0.0));
        assert!(report.perturbation_gaps.iter().all(|&g| g == 0.0));
        assert!(report.integrand_gaps.iter().all(|&g| g == 0.0));
        assert!(report.initial_pass && report.perturbation_pass && report.integrand_pass);
        // Constant sequence: C collapses to the single majorant integral.
        let c = report.uniform_bound_estimate.unwrap();
        assert!((c - 1.0).abs() < 1e-12, "C = {c}");
        assert_eq!(report.modulus_pass, Some(true));
    }

    #[test]
    fn hypothesis_check_shifted_initials() {
        let base = base_problem(64);
        let f = base.integrand().clone();
        let h = base.perturbation().clone();
        let seq = ParamSequence::new(
            base,
            8,
            move |_| f.clone(),
            move |_| h.clone(),
            |k| vec![1.0 / k as f64],
        )
        .unwrap();
        let report = hypothesis_check(&seq, HypothesisOptions::default()).unwrap();
        for (i, &gap) in report.initial_gaps.iter().enumerate() {
            assert!((gap - 1.0 / (i as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_bound_respects_scaled_majorants() {
        // M_k = (1 + 1/k) M: the mixed-sum bound cannot exceed twice the
        // base integral, and the estimate reaches at least the base one.
        let base = base_problem(64);
        let grid = base.grid().clone();
        let h = base.perturbation().clone();
        let base_integral = 1.0;
        let seq = ParamSequence::new(
            base,
            8,
            move |k| {
                let scale = 1.0 + 1.0 / k as f64;
                let m = RegulatedPath::constant(grid.clone(), &[scale]).unwrap();
                FieldSpec::scalar(move |_, u: f64| scale * u.cos()).with_bound_path(m)
            },
            move |_| h.clone(),
            |_| vec![0.0],
        )
        .unwrap();
        let report = hypothesis_check(&seq, HypothesisOptions::default()).unwrap();
        let c = report.uniform_bound_estimate.unwrap();
        assert!(c <= 2.0 * base_integral + 1e-12);
        assert!(c >= base_integral);
    }

    #[test]
    fn dependence_constant_sequence_has_zero_gaps() {
        let seq = ParamSequence::constant(base_problem(128), 5).unwrap();
        let table = dependence_run(&seq).unwrap();
        assert!(table.rows.iter().all(|r| r.solved));
        let tol = 2.0 * seq.base.options().sweep_tol;
        assert!(table.rows.iter().all(|r| r.gap <= tol));
        assert_eq!(table.monotone_fraction, 1.0);
    }

    #[test]
    fn dependence_shifted_initial_is_exact() {
        // f = h = 0: solutions are the constant initial values, so the gap
        // sequence is exactly 1/k.
        let grid = TimeGrid::uniform(0.0, 1.0, 16).unwrap();
        let g = StieltjesIntegrator::identity(grid.clone());
        let base = HmdeProblem::new(
            vec![0.0],
            FieldSpec::zero(1),
            FieldSpec::zero(1),
            g,
            SolverOptions::new(grid),
        )
        .unwrap();
        let seq = ParamSequence::new(
            base,
            12,
            |_| FieldSpec::zero(1),
            |_| FieldSpec::zero(1),
            |k| vec![1.0 / k as f64],
        )
        .unwrap();
        let table = dependence_run(&seq).unwrap();
        for row in &table.rows {
            assert!(row.solved);
            assert!((row.gap - 1.0 / row.k as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn dependence_vanishing_forcing_perturbation() {
        let base = base_problem(200);
        let h = base.perturbation().clone();
        let x0 = base.x0().to_vec();
        let seq = ParamSequence::new(
            base,
            16,
            |k| {
                let amp = 1.0 / k as f64;
                FieldSpec::scalar(move |t: f64, u: f64| u.cos() + amp * t.sin())
            },
            move |_| h.clone(),
            move |_| x0.clone(),
        )
        .unwrap();
        let table = dependence_run(&seq).unwrap();
        assert!(table.rows.iter().all(|r| r.solved));
        // Gaps decay like the perturbation amplitude.
        let g1 = table.rows[0].gap;
        let g16 = table.rows[15].gap;
        assert!(g16 <= 0.1 * g1, "g1 = {g1}, g16 = {g16}");
        assert!(table.monotone_fraction >= 0.99);
        // Solver failures are recorded, not raised: direct check of the
        // min-gap helper.
        assert!(table.min_gap_from(8).unwrap() <= table.rows[7].gap);
    }

    #[test]
    fn perturbation_at_shifted_initials_converges() {
        // First step of the dependence argument, observed numerically:
        // h_k(t0, x0_k) approaches h(t0, x0) when both the data and the
        // initial values converge.
        let base = base_problem(32);
        let t0 = base.t0();
        let x0 = base.x0().to_vec();
        let h_base = base.perturbation().clone();
        let seq = ParamSequence::new(
            base,
            32,
            |_| FieldSpec::scalar(|_, u: f64| u.cos()),
            |k| {
                let wobble = 1.0 / k as f64;
                FieldSpec::scalar(move |_, u: f64| 0.25 * u + wobble)
            },
            |k| vec![1.0 / k as f64],
        )
        .unwrap();
        let target = h_base.eval(t0, &x0).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1usize, 2, 4, 8, 16, 32] {
            let h_k = seq.perturbation_at(k);
            let x0_k = seq.initial_at(k);
            let gap = dist(&h_k.eval(t0, &x0_k).unwrap(), &target);
            assert!(gap <= prev + 1e-15);
            prev = gap;
        }
        assert!(prev <= 0.05, "terminal gap {prev}");
    }

    #[test]
    fn dependence_records_failures_and_continues() {
        let base = base_problem(32);
        let h = base.perturbation().clone();
        let seq = ParamSequence::new(
            base,
            3,
            |k| {
                if k == 2 {
                    // Non-finite field: this instance must fail to solve.
                    FieldSpec::scalar(|_, _| f64::NAN)
                } else {
                    FieldSpec::scalar(|_, u: f64| u.cos())
                }
            },
            move |_| h.clone(),
            |_| vec![0.0],
        )
        .unwrap();
        let table = dependence_run(&seq).unwrap();
        assert!(table.rows[0].solved);
        assert!(!table.rows[1].solved);
        assert!(table.rows[1].gap.is_nan());
        assert!(table.rows[2].solved);
    }
}
