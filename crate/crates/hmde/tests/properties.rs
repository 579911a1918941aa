//! Property tests for the data model and the integration engine, driven by
//! randomized piecewise-linear paths and mixed continuous-plus-jump
//! integrators.

use hmde::{
    fine_partition_oracle, indefinite_integral, ks_integral, RegulatedPath, StieltjesIntegrator,
    TimeGrid,
};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Setup {
    path: RegulatedPath,
    g: StieltjesIntegrator,
}

fn arb_grid() -> impl Strategy<Value = TimeGrid> {
    (
        -1.0f64..1.0,
        prop::collection::vec(0.05f64..0.8, 1..6),
    )
        .prop_map(|(start, deltas)| {
            let mut times = vec![start];
            for d in deltas {
                let next = times.last().unwrap() + d;
                times.push(next);
            }
            TimeGrid::new(times).unwrap()
        })
}

/// Paths with jumps at nodes plus integrators with a random mix of
/// continuous rise and node jumps on a shared grid.
fn arb_setup(continuous_path: bool) -> impl Strategy<Value = Setup> {
    arb_grid().prop_flat_map(move |grid| {
        let n = grid.len();
        (
            Just(grid),
            prop::collection::vec(-2.0f64..2.0, 3 * n),
            prop::collection::vec(0.0f64..1.0, n - 1),
            prop::collection::vec(prop::option::weighted(0.5, 0.01f64..1.0), n - 1),
        )
            .prop_map(move |(grid, raw, cont_deltas, jump_sizes)| {
                let (mut left, value, mut right) = (
                    raw[..n].to_vec(),
                    raw[n..2 * n].to_vec(),
                    raw[2 * n..].to_vec(),
                );
                if continuous_path {
                    left = value.clone();
                    right = value.clone();
                } else {
                    left[0] = value[0];
                    right[n - 1] = value[n - 1];
                }
                let path = RegulatedPath::from_nodes(grid.clone(), 1, left, value, right).unwrap();
                let mut cont = vec![0.0];
                for d in &cont_deltas {
                    let next = cont.last().unwrap() + d;
                    cont.push(next);
                }
                let jumps: Vec<(f64, f64)> = jump_sizes
                    .iter()
                    .enumerate()
                    .filter_map(|(i, s)| s.map(|delta| (grid.times()[i], delta)))
                    .collect();
                let g = StieltjesIntegrator::new(grid, cont, &jumps).unwrap();
                Setup { path, g }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn step_approximation_meets_its_bound(setup in arb_setup(false), eps in 0.01f64..1.0) {
        let steps = setup.path.approximate_by_steps(eps).unwrap();
        prop_assert!(steps.is_step());
        prop_assert!(steps.grid().is_superset_of(setup.path.grid()));
        let d = setup.path.uniform_dist(&steps).unwrap();
        prop_assert!(d <= eps + 1e-12, "distance {d} above eps {eps}");
    }

    #[test]
    fn integral_respects_sup_times_variation(setup in arb_setup(false)) {
        let (a, b) = setup.path.span();
        let v = ks_integral(&setup.path, &setup.g, a, b).unwrap()[0];
        let bound = setup.path.sup_norm() * setup.g.total_variation();
        prop_assert!(v.abs() <= bound + 1e-12, "{v} vs bound {bound}");
    }

    #[test]
    fn integral_additive_over_adjacent_intervals(setup in arb_setup(false), pick in 0usize..100) {
        let times = setup.path.grid().times().to_vec();
        let mid = times[1 + pick % (times.len() - 2).max(1)];
        let (a, b) = setup.path.span();
        if mid > a && mid < b {
            let whole = ks_integral(&setup.path, &setup.g, a, b).unwrap()[0];
            let first = ks_integral(&setup.path, &setup.g, a, mid).unwrap()[0];
            let second = ks_integral(&setup.path, &setup.g, mid, b).unwrap()[0];
            prop_assert!((whole - (first + second)).abs() <= 1e-12);
        }
    }

    #[test]
    fn integral_linear_in_the_integrand(setup in arb_setup(false), a in -2.0f64..2.0, c in -2.0f64..2.0) {
        let (lo, hi) = setup.path.span();
        let combined = setup.path.scale(a).offset(&[c]).unwrap();
        let lhs = ks_integral(&combined, &setup.g, lo, hi).unwrap()[0];
        let base = ks_integral(&setup.path, &setup.g, lo, hi).unwrap()[0];
        let ones = RegulatedPath::constant(setup.path.grid().clone(), &[1.0]).unwrap();
        let unit = ks_integral(&ones, &setup.g, lo, hi).unwrap()[0];
        prop_assert!((lhs - (a * base + c * unit)).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn integral_linear_in_jump_sizes(setup in arb_setup(false), lambda in 0.1f64..3.0) {
        let (lo, hi) = setup.path.span();
        let grid = setup.g.grid().clone();
        let cont = setup.g.cont_values().to_vec();
        let scaled_jumps: Vec<(f64, f64)> =
            setup.g.jumps().map(|(t, d)| (t, lambda * d)).collect();
        let g_cont = StieltjesIntegrator::new(grid.clone(), cont.clone(), &[]).unwrap();
        let g_scaled = StieltjesIntegrator::new(grid, cont, &scaled_jumps).unwrap();
        let full = ks_integral(&setup.path, &setup.g, lo, hi).unwrap()[0];
        let cont_only = ks_integral(&setup.path, &g_cont, lo, hi).unwrap()[0];
        let scaled = ks_integral(&setup.path, &g_scaled, lo, hi).unwrap()[0];
        // Jump contributions scale linearly; the continuous part is shared.
        let expect = cont_only + lambda * (full - cont_only);
        prop_assert!((scaled - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
    }

    #[test]
    fn regrid_reproduces_evaluations(setup in arb_setup(false), picks in prop::collection::vec(0.0f64..1.0, 4)) {
        let path = &setup.path;
        let (a, b) = path.span();
        let extra: Vec<f64> = picks.iter().map(|w| a + w * (b - a)).collect();
        let fine = match path.grid().refine_with(&extra, 1e-9) {
            Ok(g) => g,
            Err(_) => return Ok(()), // a pick collided with a node
        };
        let refined = path.regrid_to(&fine).unwrap();
        for &t in path.grid().times() {
            prop_assert_eq!(path.eval(t).unwrap(), refined.eval(t).unwrap());
        }
        for w in [0.13, 0.57, 0.91] {
            let t = a + w * (b - a);
            let x = path.eval(t).unwrap()[0];
            let y = refined.eval(t).unwrap()[0];
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn variation_equals_endpoint_gap(setup in arb_setup(false)) {
        let g = &setup.g;
        let (a, b) = g.span();
        let rise = g.right_limit(b).unwrap() - g.eval(a).unwrap();
        prop_assert!((g.total_variation() - rise).abs() <= 1e-12);
        // Left-continuity closure at every node.
        for (tau, delta) in g.jumps() {
            let gt = g.eval(tau).unwrap();
            prop_assert_eq!(g.right_limit(tau).unwrap(), gt + delta);
        }
    }

    #[test]
    fn indefinite_integral_jump_relations(setup in arb_setup(false)) {
        let (a, _) = setup.path.span();
        let p = indefinite_integral(&setup.path, &setup.g, a).unwrap();
        prop_assert!(p.is_left_continuous());
        prop_assert_eq!(p.eval(a).unwrap()[0], 0.0);
        for (tau, delta) in setup.g.jumps() {
            let (left, right) = p.one_sided_limits(tau).unwrap();
            let at = p.eval(tau).unwrap()[0];
            let f_at = setup.path.eval(tau).unwrap()[0];
            prop_assert!((right[0] - at - f_at * delta).abs() <= 1e-12 * (1.0 + at.abs()));
            prop_assert_eq!(left[0], at);
        }
    }
}

proptest! {
    // The oracle runs a few thousand evaluations per level, so fewer cases.
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_oracle_converges_monotonically(setup in arb_setup(true)) {
        let (a, b) = setup.path.span();
        let exact = ks_integral(&setup.path, &setup.g, a, b).unwrap()[0];
        let mut prev = f64::INFINITY;
        for level in 4..=8u32 {
            let s = fine_partition_oracle(&setup.path, &setup.g, a, b, level).unwrap()[0];
            let err = (s - exact).abs();
            prop_assert!(err <= prev + 1e-12, "level {level}: {err} after {prev}");
            prev = err;
        }
        prop_assert!(prev <= 1e-4 * (1.0 + exact.abs()), "final error {prev}");
    }
}
