use std::sync::Arc;

use proptest::prelude::*;
use sigma_shape_core::functional::constant;
use sigma_shape_core::{
    solve_adjoint, CostIntegrand, DirichletRegion, Field, Polygon, ShapeProblem, SolverOptions,
    Vec2,
};

fn problem(p: f64, f: sigma_shape_core::ScalarFn, h: f64) -> ShapeProblem {
    ShapeProblem::new(
        Polygon::unit_square(),
        f.clone(),
        p,
        CostIntegrand::compliance(f, p),
        h,
    )
}

fn segment(a: (f64, f64), b: (f64, f64)) -> DirichletRegion {
    DirichletRegion::polyline(vec![Vec2::new(a.0, a.1), Vec2::new(b.0, b.1)], 0.0).unwrap()
}

fn sup_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nonnegative_source_gives_nonnegative_state(
        p in prop_oneof![Just(2.0), 1.5..4.0f64],
        a in 0.0..2.0f64,
        b in 0.0..5.0f64,
        ax in 0.2..0.4f64, ay in 0.2..0.8f64,
        bx in 0.6..0.8f64, by in 0.2..0.8f64,
    ) {
        let f: sigma_shape_core::ScalarFn = Arc::new(move |x: Vec2| a + b * x.x * x.y);
        let prob = problem(p, f, 0.08);
        let u = prob.state(prob.mesh(&segment((ax, ay), (bx, by))).unwrap()).unwrap();
        let min = u.values().iter().copied().fold(f64::INFINITY, f64::min);
        let bound = if p == 2.0 { -1e-10 } else { -1e-6 };
        prop_assert!(min >= bound, "min {min} at p={p}");
    }

    #[test]
    fn newton_decreases_the_energy(p in 1.5..4.0f64, c in 0.5..3.0f64) {
        let prob = problem(p, constant(c), 0.1);
        let u = prob.state(prob.mesh(&DirichletRegion::empty()).unwrap()).unwrap();
        let e = &u.info().energies;
        prop_assert!(e.len() >= 2);
        for w in e.windows(2) {
            prop_assert!(w[1] < w[0], "{e:?}");
        }
    }
}

#[test]
fn regularization_error_is_quadratic_in_eps() {
    for p in [1.5, 3.0] {
        let mut prob = problem(p, constant(1.0), 0.1);
        prob.solver.tol = 1e-13;
        let mesh = prob.mesh(&DirichletRegion::empty()).unwrap();
        let u: Vec<Field> = [1e-4, 5e-5, 2.5e-5]
            .iter()
            .map(|e| {
                prob.solver.regularization = Some(*e);
                prob.state(mesh.clone()).unwrap()
            })
            .collect();
        let (d1, d2) = (sup_diff(&u[0], &u[1]), sup_diff(&u[1], &u[2]));
        assert!(d1 <= 1e-4, "p={p}: {d1}");
        let ratio = d2 / d1;
        assert!((0.2..=0.3).contains(&ratio), "p={p}: ratio {ratio}");
    }
}

#[test]
fn solves_are_deterministic() {
    let prob = problem(3.0, constant(1.0), 0.07);
    let region = segment((0.3, 0.4), (0.7, 0.6));
    let a = prob.solve(&region).unwrap();
    let b = prob.solve(&region).unwrap();
    assert_eq!(a.u.values(), b.u.values());
    assert_eq!(a.q.values(), b.q.values());
}

#[test]
fn zero_cost_has_zero_adjoint() {
    let prob = problem(3.0, constant(1.0), 0.1);
    let u = prob
        .state(prob.mesh(&segment((0.3, 0.5), (0.7, 0.5))).unwrap())
        .unwrap();
    let q = solve_adjoint(&u, &CostIntegrand::zero(), &SolverOptions::default()).unwrap();
    assert!(q.values().iter().all(|v| *v == 0.0));
}

#[test]
fn disk_adjoint_is_radial_at_p3() {
    let prob = ShapeProblem::new(
        Polygon::unit_disk(64),
        constant(1.0),
        3.0,
        CostIntegrand::compliance(constant(1.0), 3.0),
        0.05,
    );
    let sol = prob.solve(&DirichletRegion::empty()).unwrap();
    for r in [0.25, 0.5, 0.75] {
        let ring: Vec<f64> = (0..48)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 48.0;
                sol.q.eval(Vec2::new(a.cos(), a.sin()) * r).unwrap()
            })
            .collect();
        let mean = ring.iter().sum::<f64>() / ring.len() as f64;
        let spread = ring.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        assert!(spread <= 2e-2 * mean, "r={r}: {spread} vs {mean}");
    }
}
