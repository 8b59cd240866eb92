use deadcore::verify::run_scaling_experiment;
use deadcore::{
    initial_bounds, sample_function, solve, solve_from, solve_with, BallSpec, Grid, Params, Point, Problem, ScalarField,
    SolveOptions,
};
use proptest::prelude::*;

fn ball(n: usize, gamma: f64, lambda: f64, c: f64) -> Problem {
    let grid = Grid::centered_square(Point::ORIGIN, 1.0, n).unwrap();
    let params = Params::with_defaults(&grid, gamma, lambda, c);
    Problem::ball(&grid, BallSpec::new(Point::ORIGIN, 1.0), c, params).unwrap()
}

fn square(n: usize, gamma: f64, lambda: f64, data: impl Fn(Point) -> f64) -> Problem {
    let grid = Grid::unit_square(n).unwrap();
    let field = sample_function(&grid, data).unwrap();
    let params = Params::with_defaults(&grid, gamma, lambda, field.max());
    Problem::new(field, params).unwrap()
}

fn edge_data(p: Point) -> f64 {
    0.2 + 0.3 * p.x + 0.1 * (3.0 * p.y).sin().abs()
}

#[test]
fn descent_never_increases_a_node() {
    let p = ball(33, 1.0, 2.0, 0.5);
    let sol = solve(&p).unwrap();
    assert!(sol.report.converged);
    assert!(sol.report.max_ascent <= p.params.tol_update, "ascent {}", sol.report.max_ascent);
    assert_eq!(sol.report.bracket_violations, 0);
}

#[test]
fn solution_stays_between_the_perron_bounds() {
    let p = square(25, 1.5, 3.0, edge_data);
    let (lower, upper) = initial_bounds(&p).unwrap();
    let u = solve(&p).unwrap().field;
    let tol = p.params.tol_update;
    for k in 0..u.grid().len() {
        assert!(u.at(k) >= lower.at(k) - tol && u.at(k) <= upper.at(k) + tol, "node {k}");
    }
}

#[test]
fn ordered_data_gives_ordered_solutions() {
    let lo = square(25, 1.0, 1.0, edge_data);
    let hi = square(25, 1.0, 1.0, |p| edge_data(p) + 0.05 + 0.1 * p.y);
    let (u1, u2) = (solve(&hi).unwrap().field, solve(&lo).unwrap().field);
    let min = u1.values().iter().zip(u2.values()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    assert!(min >= -10.0 * lo.params.tol_update, "min difference {min}");
}

#[test]
fn larger_modulus_gives_a_smaller_solution() {
    let weak = solve(&ball(33, 1.0, 1.0, 0.3)).unwrap().field;
    let strong = solve(&ball(33, 1.0, 4.0, 0.3)).unwrap().field;
    let min = weak.values().iter().zip(strong.values()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-9, "min difference {min}");
}

#[test]
fn solutions_are_nonnegative() {
    for gamma in [0.0, 1.0, 2.5] {
        let sol = solve(&ball(33, gamma, 5.0, 0.2)).unwrap();
        assert!(sol.field.min() >= 0.0, "gamma {gamma}: min {}", sol.field.min());
    }
}

#[test]
fn descent_and_accelerated_modes_agree() {
    // Both stop well inside the comparison tolerance.
    let mut p = ball(65, 1.0, 1.0, 0.2);
    let tol = p.params.tol_update;
    p.params.tol_update = tol / 100.0;
    p.params.tol_residual = f64::MIN_POSITIVE;
    let a = solve(&p).unwrap().field;
    let options = SolveOptions { bracket_check: false, accelerate: true };
    let b = solve_with(&p, options).unwrap().field;
    let d = a.max_abs_diff(&b).unwrap();
    assert!(d <= 20.0 * tol, "difference {d}");
}

#[test]
fn the_fixed_point_does_not_depend_on_the_start() {
    let p = ball(33, 0.5, 2.0, 0.4);
    let (lower, _) = initial_bounds(&p).unwrap();
    let from_above = solve(&p).unwrap().field;
    let from_below = solve_from(&p, &lower).unwrap();
    assert!(from_below.report.converged);
    let zero = solve_from(&p, &ScalarField::zeros(p.grid())).unwrap().field;
    let tol = 20.0 * p.params.tol_update;
    assert!(from_above.max_abs_diff(&from_below.field).unwrap() <= tol);
    assert!(from_above.max_abs_diff(&zero).unwrap() <= tol);
}

#[test]
fn thread_count_does_not_change_the_result() {
    let p = ball(33, 1.0, 1.0, 0.3);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| solve(&p).unwrap().field.into_values())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn linear_data_is_reproduced_without_absorption() {
    let p = square(17, 1.0, 0.0, |p| 1.0 + p.x - 0.5 * p.y);
    let u = solve(&p).unwrap().field;
    let exact = sample_function(p.grid(), |p| 1.0 + p.x - 0.5 * p.y).unwrap();
    assert!(u.max_abs_diff(&exact).unwrap() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn solutions_scale_with_the_equation(
        gamma in 0.0f64..2.5,
        lambda in 0.5f64..4.0,
        k in 0.5f64..3.0,
        rho in 0.5f64..2.0,
    ) {
        let rep = run_scaling_experiment(&ball(17, gamma, lambda, 0.3), k, rho).unwrap();
        prop_assert!(rep.passed, "{:?}", rep.metrics);
        prop_assert!(rep.metrics["max_discrepancy"] <= 10.0 * 1e-10);
    }

    #[test]
    fn raising_the_data_never_lowers_the_solution(bump in 0.0f64..0.5, gamma in 0.0f64..2.5) {
        let lo = square(13, gamma, 2.0, edge_data);
        let hi = square(13, gamma, 2.0, |p| edge_data(p) + bump * p.x * p.y);
        let (u1, u2) = (solve(&hi).unwrap().field, solve(&lo).unwrap().field);
        let min = u1.values().iter().zip(u2.values()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -10.0 * lo.params.tol_update);
    }
}
