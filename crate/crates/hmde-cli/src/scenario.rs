//! Executes validated scenarios: builds the catalog problem, runs the
//! requested analysis, and writes CSV tables plus a plain-text report.
//!
//! Outputs are deterministic for a fixed (scenario, seed): float columns use
//! the shortest round-trip decimal form, collections are written in a fixed
//! order, and every random diagnostic draws from a seeded generator.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hmde::asymptotics::{
    bounded_condition_check, chain_solve, generate_example_path, sap_profile, HorizonProblem,
    SapProfile,
};
use hmde::dependence::{dependence_run, hypothesis_check, HypothesisOptions, ParamSequence};
use hmde::frontends::{from_impulsive, from_timescale, restrict_to_timescale, ImpulsiveSpec, TimeScaleSpec};
use hmde::solver::{certificate_a, certificate_margin_at, solve_forward};
use hmde::{FieldSpec, HmdeProblem, RegulatedPath, SolverOptions, StieltjesIntegrator, TimeGrid};
use thiserror::Error;

use crate::catalog;
use crate::config::{Scenario, ScenarioKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Solver(#[from] hmde::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Files written by a run, in the order they were produced.
#[derive(Debug)]
pub struct Manifest {
    pub files: Vec<PathBuf>,
}

struct Params<'a>(&'a Scenario);

impl Params<'_> {
    fn f(&self, name: &str) -> f64 {
        self.0.params[name].as_f64().expect("validated float")
    }

    fn usize(&self, name: &str) -> usize {
        self.0.params[name].as_usize().expect("validated int")
    }

    fn list(&self, name: &str) -> &[f64] {
        self.0.params[name].as_list().expect("validated list")
    }

    fn text(&self, name: &str) -> &str {
        self.0.params[name].as_text().expect("validated text")
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn solver_options(scenario: &Scenario, grid: TimeGrid) -> SolverOptions {
    let mut options = SolverOptions::new(grid);
    if let Some(point) = scenario.tolerances.point {
        options.point_tol = point;
    }
    if let Some(sweep) = scenario.tolerances.sweep {
        options.sweep_tol = sweep;
    }
    options
}

fn grid_step(scenario: &Scenario) -> f64 {
    scenario
        .grid
        .step
        .unwrap_or_else(|| catalog::find(&scenario.catalog).expect("validated id").default_step)
}

struct Sink {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self) -> Manifest {
        Manifest { files: self.files }
    }
}

fn solution_csv(path: &RegulatedPath) -> String {
    let dim = path.dim();
    let mut out = String::from("t");
    for prefix in ["x", "left", "right"] {
        for k in 1..=dim {
            let _ = write!(out, ",{prefix}_{k}");
        }
    }
    out.push('\n');
    for (i, &t) in path.grid().times().iter().enumerate() {
        let _ = write!(out, "{}", fmt_f(t));
        for row in [
            path.value_at_node(i),
            path.left_at_node(i),
            path.right_at_node(i),
        ] {
            for v in row {
                let _ = write!(out, ",{}", fmt_f(*v));
            }
        }
        out.push('\n');
    }
    out
}

fn profile_csv(profile: &SapProfile) -> String {
    let mut out = String::from("t,gap\n");
    for (t, gap) in profile.sample_times.iter().zip(&profile.gaps) {
        let _ = writeln!(out, "{},{}", fmt_f(*t), fmt_f(*gap));
    }
    out
}

fn report_header(scenario: &Scenario) -> String {
    format!(
        "scenario: kind = {}, catalog = {}, seed = {}\n",
        scenario.kind, scenario.catalog, scenario.seed
    )
}

fn push_solve_summary(report: &mut String, solve: &hmde::SolveReport) {
    let _ = writeln!(report, "residual: {}", fmt_f(solve.residual));
    let _ = writeln!(report, "sweeps: {}", solve.sweeps);
    let max_iters = solve.point_iters.iter().copied().max().unwrap_or(0);
    let _ = writeln!(report, "max point iterations per node: {max_iters}");
    if let Some(samples) = solve.modulus_samples {
        let _ = writeln!(
            report,
            "contraction modulus screened on {samples} samples (sampling cannot prove it everywhere)"
        );
    }
    match &solve.certificate {
        Some(cert) => {
            let _ = writeln!(
                report,
                "certificate: radius {} (margin {}, h0 {}, k0 {})",
                fmt_f(cert.radius),
                fmt_f(cert.margin),
                fmt_f(cert.h0),
                fmt_f(cert.k0)
            );
        }
        None => {
            let _ = writeln!(report, "certificate: not available from the declared data");
        }
    }
}

fn example_3x_problem(scenario: &Scenario) -> Result<HmdeProblem, RunError> {
    let p = Params(scenario);
    let (gamma, eta, x0) = (p.f("gamma"), p.f("eta"), p.f("x0"));
    if eta < 0.0 {
        return Err(RunError::Scenario("eta must be nonnegative".into()));
    }
    let grid = TimeGrid::with_step(0.0, 1.0, grid_step(scenario))?;
    let g = StieltjesIntegrator::identity(grid.clone());
    let m = RegulatedPath::constant(grid.clone(), &[gamma.exp() * eta])?;
    let f = FieldSpec::scalar(move |_, u: f64| eta * (gamma * u.cos()).exp()).with_bound_path(m);
    let h = FieldSpec::scalar(|t: f64, u: f64| 0.5 * t.sin().powi(2) * (1.0 + u.abs()).ln())
        .with_modulus(Arc::new(|t: f64| 0.5 * (1.0 + t).ln()));
    let options = solver_options(scenario, grid);
    Ok(HmdeProblem::new(vec![x0], f, h, g, options)?)
}

fn run_solve(scenario: &Scenario, sink: &mut Sink) -> Result<(), RunError> {
    let problem = example_3x_problem(scenario)?;
    let solve = solve_forward(&problem)?;
    sink.write("solution.csv", &solution_csv(&solve.solution))?;
    let mut report = report_header(scenario);
    push_solve_summary(&mut report, &solve);
    sink.write("report.txt", &report)?;
    Ok(())
}

fn run_certificate(scenario: &Scenario, sink: &mut Sink) -> Result<(), RunError> {
    let problem = example_3x_problem(scenario)?;
    let cert = certificate_a(&problem)?;
    let mut report = report_header(scenario);
    let _ = writeln!(report, "satisfied: {}", cert.satisfied);
    let _ = writeln!(report, "radius: {}", fmt_f(cert.radius));
    let _ = writeln!(report, "margin: {}", fmt_f(cert.margin));
    let _ = writeln!(report, "h0: {}", fmt_f(cert.h0));
    let _ = writeln!(report, "k0: {}", fmt_f(cert.k0));
    let _ = writeln!(report, "margins over the radius scan:");
    for exp in 0..=6 {
        let n = (2.0f64).powi(exp);
        let margin = certificate_margin_at(&problem, n)?;
        let _ = writeln!(report, "  N = {}: margin {}", fmt_f(n), fmt_f(margin));
    }
    sink.write("report.txt", &report)?;
    Ok(())
}

fn run_impulsive(scenario: &Scenario, sink: &mut Sink) -> Result<(), RunError> {
    let p = Params(scenario);
    let (lambda, beta, x0, duration) =
        (p.f("lambda"), p.f("beta"), p.f("x0"), p.f("duration"));
    let taus = p.list("impulse_times").to_vec();
    let spec = ImpulsiveSpec::new(
        0.0,
        duration,
        vec![x0],
        FieldSpec::scalar(move |_, u| lambda * u),
        FieldSpec::zero(1),
        taus.iter()
            .map(|&tau| (tau, ImpulsiveSpec::scalar_impulse(move |u| beta * u)))
            .collect(),
    )
    .map_err(RunError::Solver)?;
    let grid = TimeGrid::with_step(0.0, duration, grid_step(scenario))?;
    let problem = from_impulsive(&spec, solver_options(scenario, grid))?;
    let solve = solve_forward(&problem)?;
    sink.write("solution.csv", &solution_csv(&solve.solution))?;

    // Closed-form product solution, written alongside for comparison.
    let oracle = |t: f64| {
        let hits = taus.iter().filter(|&&tau| tau < t).count() as i32;
        x0 * (lambda * t).exp() * (1.0 + beta).powi(hits)
    };
    let mut csv = String::from("t,x_1\n");
    let mut sup_err: f64 = 0.0;
    for (i, &t) in problem.grid().times().iter().enumerate() {
        let reference = oracle(t);
        let _ = writeln!(csv, "{},{}", fmt_f(t), fmt_f(reference));
        sup_err = sup_err.max((solve.solution.value_at_node(i)[0] - reference).abs());
    }
    sink.write("oracle.csv", &csv)?;

    let mut report = report_header(scenario);
    push_solve_summary(&mut report, &solve);
    let _ = writeln!(report, "sup error against the product formula: {}", fmt_f(sup_err));
    sink.write("report.txt", &report)?;
    Ok(())
}

fn run_timescale(scenario: &Scenario, sink: &mut Sink) -> Result<(), RunError> {
    let p = Params(scenario);
    let rate = p.f("rate");
    let x0 = p.f("x0");
    let points = p.list("points").to_vec();
    let spec = TimeScaleSpec::from_points(
        &points,
        vec![x0],
        FieldSpec::scalar(move |_, u| rate * u),
        FieldSpec::zero(1),
    )
    .map_err(RunError::Solver)?;
    let grid = TimeGrid::with_step(spec.t0(), spec.t_end(), grid_step(scenario))?;
    let problem = from_timescale(&spec, solver_options(scenario, grid))?;
    let solve = solve_forward(&problem)?;
    sink.write("solution.csv", &solution_csv(&solve.solution))?;

    let table = restrict_to_timescale(&solve.solution, &spec)?;
    let mut csv = String::from("t,x_1\n");
    for (t, x) in &table.rows {
        let _ = writeln!(csv, "{},{}", fmt_f(*t), fmt_f(x[0]));
    }
    sink.write("restricted.csv", &csv)?;

    let mut report = report_header(scenario);
    push_solve_summary(&mut report, &solve);
    let _ = writeln!(report, "scale samples: {}", table.rows.len());
    sink.write("report.txt", &report)?;
    Ok(())
}

fn run_horizon(scenario: &Scenario, sink: &mut Sink) -> Result<(), RunError> {
    let p = Params(scenario);
    let (horizon, chain, rate, x0) =
        (p.f("horizon"), p.f("chain"), p.f("rate"), p.f("x0"));
    let radii = p.list("radii").to_vec();
    let grid = TimeGrid::with_step(0.0, horizon, grid_step(scenario))?;
    let g = StieltjesIntegrator::identity(grid.clone());
    let f = FieldSpec::scalar(move |t: f64, u: f64| (-t).exp() - rate * u)
        .with_bound_family(Arc::new(move |s: f64, r: f64| (-s).exp() + rate * r));
    let hp = HorizonProblem::new(vec![x0], f, FieldSpec::zero(1), g, grid, chain)?;
    let solve = chain_solve(&hp)?;
    sink.write("solution.csv", &solution_csv(&solve.solution))?;

    let bounded = bounded_condition_check(&hp, &radii)?;
    let mut report = report_header(scenario);
    push_solve_summary(&mut report, &solve);
    let _ = writeln!(report, "boundedness ratios (below one supports a bounded ball):");
    for row in &bounded.rows {
        let _ = writeln!(
            report,
            "  N = {}: ratio {} (h sup {}, majorant integral {})",
            fmt_f(row.radius),
            fmt_f(row.ratio),
            fmt_f(row.h_sup),
            fmt_f(row.m_integral)
        );
    }
    let _ = writeln!(report, "any ratio below one: {}", bounded.any_below_one);
    sink.write("report.txt", &report)?;
    Ok(())
}

fn run_sap(scenario: &Scenario, sink: &mut Sink) -> Result<(), RunError> {
    let p = Params(scenario);
    let omega = p.f("omega");
    let horizon = p.f("horizon");
    let windows = p.usize("windows");
    let tol = p.f("tol");
    let path = match scenario.catalog.as_str() {
        "example_4x_sap" => match p.text("sequence") {
            "reciprocal" => generate_example_path(|n| 1.0 / (n as f64 + 1.0), horizon)?,
            "alternating" => {
                generate_example_path(|n| if n % 2 == 0 { 1.0 } else { -1.0 }, horizon)?
            }
            other => return Err(RunError::Scenario(format!("unknown sequence {other:?}"))),
        },
        "sine_sap" => {
            let grid = TimeGrid::with_step(0.0, horizon, p.f("sample_step"))?;
            RegulatedPath::sample_scalar(grid, |t| t.sin())?
        }
        other => {
            return Err(RunError::Scenario(format!(
                "catalog entry {other:?} does not produce a profile path"
            )))
        }
    };
    let profile = sap_profile(&path, omega, windows, tol)?;
    sink.write("profile.csv", &profile_csv(&profile))?;
    let mut report = report_header(scenario);
    let _ = writeln!(
        report,
        "classification: {} (final-window sup vs tolerance {} over horizon {})",
        if profile.is_sap {
            "S-asymptotically periodic at tolerance"
        } else {
            "not S-asymptotically periodic at tolerance"
        },
        fmt_f(tol),
        fmt_f(horizon)
    );
    let _ = writeln!(report, "window sups:");
    for (w, sup) in profile.window_sups.iter().enumerate() {
        let _ = writeln!(report, "  window {w}: {}", fmt_f(*sup));
    }
    sink.write("report.txt", &report)?;
    Ok(())
}

fn dependence_sequence(scenario: &Scenario) -> Result<ParamSequence, RunError> {
    let p = Params(scenario);
    let k_max = p.usize("k_max");
    let grid = TimeGrid::with_step(0.0, 1.0, grid_step(scenario))?;
    let g = StieltjesIntegrator::identity(grid.clone());
    match scenario.catalog.as_str() {
        "dependence_forcing" => {
            let amplitude = p.f("amplitude");
            let m = RegulatedPath::constant(grid.clone(), &[1.0])?;
            let f = FieldSpec::scalar(|_, u: f64| u.cos()).with_bound_path(m);
            let h = FieldSpec::scalar(|_, u: f64| 0.25 * u)
                .with_modulus(Arc::new(|t: f64| 0.25 * t));
            let base = HmdeProblem::new(
                vec![0.0],
                f,
                h.clone(),
                g,
                solver_options(scenario, grid.clone()),
            )?;
            let h_for_seq = h.clone();
            Ok(ParamSequence::new(
                base,
                k_max,
                move |k| {
                    let amp = amplitude / k as f64;
                    let m = RegulatedPath::constant(grid.clone(), &[1.0 + amp.abs()])
                        .expect("constant path");
                    FieldSpec::scalar(move |t: f64, u: f64| u.cos() + amp * t.sin())
                        .with_bound_path(m)
                },
                move |_| h_for_seq.clone(),
                |_| vec![0.0],
            )?)
        }
        "dependence_initial" => {
            let m = RegulatedPath::zero(grid.clone(), 1)?;
            let f = FieldSpec::zero(1).with_bound_path(m.clone());
            let h = FieldSpec::zero(1).with_modulus(Arc::new(|_t: f64| 0.0));
            let base = HmdeProblem::new(
                vec![0.0],
                f.clone(),
                h.clone(),
                g,
                solver_options(scenario, grid),
            )?;
            let h_for_seq = h.clone();
            let f_for_seq = f.clone();
            Ok(ParamSequence::new(
                base,
                k_max,
                move |_| f_for_seq.clone(),
                move |_| h_for_seq.clone(),
                |k| vec![1.0 / k as f64],
            )?)
        }
        other => Err(RunError::Scenario(format!(
            "catalog entry {other:?} is not a dependence family"
        ))),
    }
}

fn run_dependence(scenario: &Scenario, sink: &mut Sink) -> Result<(), RunError> {
    let seq = dependence_sequence(scenario)?;
    let table = dependence_run(&seq)?;
    let mut csv = String::from("k,gap,solved_flag\n");
    for row in &table.rows {
        let _ = writeln!(
            csv,
            "{},{},{}",
            row.k,
            fmt_f(row.gap),
            if row.solved { 1 } else { 0 }
        );
    }
    sink.write("dependence.csv", &csv)?;

    let hypotheses = hypothesis_check(
        &seq,
        HypothesisOptions {
            seed: scenario.seed,
            ..HypothesisOptions::default()
        },
    )?;
    let mut report = report_header(scenario);
    let _ = writeln!(report, "base residual: {}", fmt_f(table.base_residual));
    let _ = writeln!(report, "monotone fraction: {}", fmt_f(table.monotone_fraction));
    if let (Some(first), Some(last)) = (table.rows.first(), table.rows.last()) {
        let _ = writeln!(report, "gap at k = {}: {}", first.k, fmt_f(first.gap));
        let _ = writeln!(report, "gap at k = {}: {}", last.k, fmt_f(last.gap));
    }
    let _ = writeln!(
        report,
        "sampled hypotheses: initial {}, perturbation {}, integrand {}",
        hypotheses.initial_pass, hypotheses.perturbation_pass, hypotheses.integrand_pass
    );
    if let Some(c) = hypotheses.uniform_bound_estimate {
        let _ = writeln!(
            report,
            "uniform bound estimate (randomized search, seed {}): {}",
            scenario.seed,
            fmt_f(c)
        );
    }
    if let Some(pass) = hypotheses.modulus_pass {
        let _ = writeln!(report, "modulus growth condition sampled: {pass}");
    }
    sink.write("report.txt", &report)?;
    Ok(())
}

/// Runs a validated scenario, writing its outputs under the scenario's
/// output directory (or `out` when unset). Deterministic for a fixed
/// (scenario, seed) pair. A failing run still leaves a `report.txt`
/// recording the error, and the error is returned for a nonzero exit.
pub fn run_scenario(scenario: &Scenario) -> Result<Manifest, RunError> {
    let default_dir = PathBuf::from("out");
    let dir = scenario.out_dir.clone().unwrap_or(default_dir);
    let mut sink = Sink::new(&dir)?;
    let outcome = match scenario.kind {
        ScenarioKind::Solve => run_solve(scenario, &mut sink),
        ScenarioKind::Certificate => run_certificate(scenario, &mut sink),
        ScenarioKind::Impulsive => run_impulsive(scenario, &mut sink),
        ScenarioKind::Timescale => run_timescale(scenario, &mut sink),
        ScenarioKind::Horizon => run_horizon(scenario, &mut sink),
        ScenarioKind::Sap => run_sap(scenario, &mut sink),
        ScenarioKind::Dependence => run_dependence(scenario, &mut sink),
    };
    match outcome {
        Ok(()) => Ok(sink.finish()),
        Err(e) => {
            let mut report = report_header(scenario);
            let _ = writeln!(report, "error: {e}");
            let _ = sink.write("report.txt", &report);
            Err(e)
        }
    }
}
