//! End-to-end flows through the public API: frontend encodings against
//! closed-form oracles, derivative checks against finite differences of
//! solved paths, and the long-horizon detector on solved problems.

use std::sync::Arc;

use hmde::asymptotics::{chain_solve, sap_profile, HorizonProblem, SAP_DEFAULT_WINDOWS};
use hmde::frontends::{from_impulsive, restrict_impulsive, ImpulsiveSpec};
use hmde::{
    derivative_field, solve_forward, FieldSpec, HmdeProblem, SolverOptions,
    StieltjesIntegrator, TimeGrid,
};

fn impulsive_linear(cells: usize, lambda: f64, beta: f64, taus: &[f64]) -> (HmdeProblem, ImpulsiveSpec) {
    let spec = ImpulsiveSpec::new(
        0.0,
        1.0,
        vec![1.0],
        FieldSpec::scalar(move |_, u| lambda * u),
        FieldSpec::zero(1),
        taus.iter()
            .map(|&t| (t, ImpulsiveSpec::scalar_impulse(move |u| beta * u)))
            .collect(),
    )
    .unwrap();
    let options = SolverOptions::new(TimeGrid::uniform(0.0, 1.0, cells).unwrap());
    let problem = from_impulsive(&spec, options).unwrap();
    (problem, spec)
}

#[test]
fn impulsive_second_order_against_product_formula() {
    let (lambda, beta): (f64, f64) = (1.0, 0.5);
    let taus = [0.25, 0.5, 0.75];
    let oracle = |t: f64| {
        let hits = taus.iter().filter(|&&tau| tau < t).count() as i32;
        (lambda * t).exp() * (1.0 + beta).powi(hits)
    };
    let sup_error = |cells: usize| {
        let (problem, _) = impulsive_linear(cells, lambda, beta, &taus);
        let report = solve_forward(&problem).unwrap();
        problem
            .grid()
            .times()
            .iter()
            .enumerate()
            .map(|(i, &t)| (report.solution.value_at_node(i)[0] - oracle(t)).abs())
            .fold(0.0f64, f64::max)
    };
    let coarse = sup_error(1000);
    let fine = sup_error(2000);
    assert!(coarse <= 1e-3, "sup error {coarse} at step 1e-3");
    assert!(
        coarse / fine >= 1.8,
        "halving the step should cut the error: {coarse} vs {fine}"
    );
}

#[test]
fn impulsive_strict_sum_consistency() {
    // Accumulating the integral form directly (explicit quadrature of the
    // solved path plus the strict sum of impulses) reproduces the solution.
    let (lambda, beta) = (0.8, 0.3);
    let taus = [0.4, 0.7];
    let (problem, spec) = impulsive_linear(800, lambda, beta, &taus);
    let report = solve_forward(&problem).unwrap();
    let x = &report.solution;
    let times = problem.grid().times();
    // Trapezoid of lambda x over the identity part.
    let mut acc = 1.0;
    let mut sup_gap = 0.0f64;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        let (_, r_prev) = x.one_sided_limits(times[i - 1]).unwrap();
        let l_cur = x.eval(times[i]).unwrap();
        acc += dt * 0.5 * (lambda * r_prev[0] + lambda * l_cur[0]);
        let mut with_impulses = acc;
        for &tau in &taus {
            if tau < times[i] {
                with_impulses += beta * x.eval(tau).unwrap()[0];
            }
        }
        sup_gap = sup_gap.max((with_impulses - x.eval(times[i]).unwrap()[0]).abs());
    }
    assert!(sup_gap <= 1e-6, "strict-sum reconstruction gap {sup_gap}");
    // And the realized jumps match the impulse maps applied at the jump times.
    let table = restrict_impulsive(x, &spec).unwrap();
    for (tau, jump) in &table.jumps {
        let expect = beta * x.eval(*tau).unwrap()[0];
        assert!((jump[0] - expect).abs() <= 1e-9);
    }
}

#[test]
fn derivative_formula_matches_path_slopes() {
    // Smooth scalar instance: compare the derivative formula against
    // centered differences of the solved path away from the endpoints.
    let grid = TimeGrid::with_step(0.0, 1.0, 1e-3).unwrap();
    let g = StieltjesIntegrator::identity(grid.clone());
    let f = FieldSpec::scalar(|_, u: f64| u.cos());
    let h = FieldSpec::scalar(|_, u: f64| 0.25 * u);
    let problem = HmdeProblem::new(vec![0.0], f, h, g, SolverOptions::new(grid)).unwrap();
    let report = solve_forward(&problem).unwrap();
    let x = &report.solution;
    let times = problem.grid().times();
    let n = times.len();
    for i in (n / 10..9 * n / 10).step_by(97) {
        let dt = times[i + 1] - times[i - 1];
        let fd = (x.value_at_node(i + 1)[0] - x.value_at_node(i - 1)[0]) / dt;
        let formula = derivative_field(&problem, x, times[i]).unwrap()[0];
        let rel = (fd - formula).abs() / formula.abs().max(1e-12);
        assert!(rel <= 1e-3, "t = {}: fd {fd} vs formula {formula}", times[i]);
    }
}

#[test]
fn planar_rotation_system_matches_closed_form() {
    // x' = (x2, -x1), x(0) = (1, 0): the solution is (cos t, -sin t).
    let grid = TimeGrid::with_step(0.0, 1.0, 1e-3).unwrap();
    let g = StieltjesIntegrator::identity(grid.clone());
    let f = FieldSpec::new(
        2,
        Arc::new(|_t: f64, u: &[f64], out: &mut [f64]| {
            out[0] = u[1];
            out[1] = -u[0];
        }),
    );
    let problem =
        HmdeProblem::new(vec![1.0, 0.0], f, FieldSpec::zero(2), g, SolverOptions::new(grid))
            .unwrap();
    let report = solve_forward(&problem).unwrap();
    let mut sup: f64 = 0.0;
    for (i, &t) in problem.grid().times().iter().enumerate() {
        let x = report.solution.value_at_node(i);
        sup = sup
            .max((x[0] - t.cos()).abs())
            .max((x[1] + t.sin()).abs());
    }
    assert!(sup <= 1e-5, "sup error {sup} against the rotation closed form");
}

#[test]
fn coupled_perturbation_derivative_uses_the_full_jacobian() {
    // h couples the components, so the derivative formula needs the inverse
    // of a genuinely non-diagonal matrix; compare against centered
    // differences of the solved path componentwise.
    let grid = TimeGrid::with_step(0.0, 1.0, 1e-3).unwrap();
    let g = StieltjesIntegrator::identity(grid.clone());
    let f = FieldSpec::new(
        2,
        Arc::new(|t: f64, u: &[f64], out: &mut [f64]| {
            out[0] = (u[1] + t).cos();
            out[1] = 0.5 * u[0].sin();
        }),
    );
    let h = FieldSpec::new(
        2,
        Arc::new(|_t: f64, u: &[f64], out: &mut [f64]| {
            out[0] = 0.25 * u[1];
            out[1] = 0.25 * u[0];
        }),
    );
    let problem =
        HmdeProblem::new(vec![0.1, -0.2], f, h, g, SolverOptions::new(grid)).unwrap();
    let report = solve_forward(&problem).unwrap();
    let x = &report.solution;
    let times = problem.grid().times();
    let n = times.len();
    for i in (n / 10..9 * n / 10).step_by(151) {
        let dt = times[i + 1] - times[i - 1];
        let formula = derivative_field(&problem, x, times[i]).unwrap();
        for component in 0..2 {
            let fd = (x.value_at_node(i + 1)[component] - x.value_at_node(i - 1)[component]) / dt;
            let rel = (fd - formula[component]).abs() / formula[component].abs().max(1e-9);
            assert!(
                rel <= 1e-3,
                "t = {}, component {component}: fd {fd} vs formula {}",
                times[i],
                formula[component]
            );
        }
    }
}

#[test]
fn solved_long_horizon_problem_is_sap_detected() {
    // Decaying forcing: x' = e^{-t} - x/2. Solutions settle, so the
    // detector should classify the solved path as S-asymptotically
    // 1-periodic at a loose tolerance.
    let grid = TimeGrid::uniform(0.0, 16.0, 1600).unwrap();
    let g = StieltjesIntegrator::identity(grid.clone());
    let f = FieldSpec::scalar(|t: f64, u: f64| (-t).exp() - 0.5 * u);
    let hp = HorizonProblem::new(vec![1.0], f, FieldSpec::zero(1), g, grid, 1.0).unwrap();
    let report = chain_solve(&hp).unwrap();
    let profile = sap_profile(&report.solution, 1.0, SAP_DEFAULT_WINDOWS, 1e-2).unwrap();
    assert!(profile.is_sap, "windows {:?}", profile.window_sups);
}

#[test]
fn composed_integrand_of_solution_is_left_continuous() {
    // Jumps in g propagate into the solution and its compositions, but
    // left-continuity is preserved throughout.
    let grid = TimeGrid::uniform(0.0, 1.0, 50).unwrap();
    let g = StieltjesIntegrator::new(
        grid.clone(),
        grid.times().to_vec(),
        &[(0.26, 0.5), (0.78, 0.25)],
    )
    .unwrap();
    let f = FieldSpec::scalar(|_, u: f64| (u + 1.0).tanh());
    let h = FieldSpec::scalar(|t: f64, u: f64| 0.3 * (t + 1.0).ln() * u.sin())
        .with_modulus(Arc::new(|t: f64| 0.3 * 2f64.ln() * t));
    let problem = HmdeProblem::new(vec![0.5], f, h, g, SolverOptions::new(grid)).unwrap();
    let report = solve_forward(&problem).unwrap();
    assert!(report.solution.is_left_continuous());
    let composed = hmde::compose_integrand(problem.integrand(), &report.solution).unwrap();
    assert!(composed.is_left_continuous());
    // The solution genuinely jumps at the integrator's jump nodes.
    let (_, right) = report.solution.one_sided_limits(0.26).unwrap();
    let at = report.solution.eval(0.26).unwrap();
    assert!((right[0] - at[0]).abs() > 1e-3);
}
