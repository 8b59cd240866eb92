use deadcore::analytic::{
    barrier_psi, growth_exponent, liouville_core_radius, liouville_envelope, modulus_for_tau, plateau_criterion,
    GAMMA_LATTICE, LAMBDA_LATTICE,
};
use deadcore::{eval_radial, make_radial, ode_residual, ray_ode_residual, tau, Point};
use proptest::prelude::*;

#[test]
fn profile_identity_holds_on_the_reference_lattice() {
    for &lambda in &LAMBDA_LATTICE {
        for &gamma in &GAMMA_LATTICE {
            let t = tau(lambda, gamma).unwrap();
            let sol = make_radial(Point::ORIGIN, 1.0, 0.3 * t, lambda, gamma).unwrap();
            let r = ray_ode_residual(&sol, 100);
            assert!(r <= 1e-9, "lambda {lambda} gamma {gamma}: {r:e}");
            for i in 1..=100 {
                let s = 0.02 * i as f64;
                let h = t * s.powf(growth_exponent(gamma).unwrap());
                let rel = ode_residual(lambda, gamma, s).unwrap().abs() / (lambda * h.powf(gamma));
                assert!(rel <= 1e-9, "lambda {lambda} gamma {gamma} s {s}: {rel:e}");
            }
        }
    }
}

#[test]
fn profile_derivatives_match_finite_differences() {
    let sol = make_radial(Point::ORIGIN, 1.0, 0.05, 2.0, 1.5).unwrap();
    let eps = 1e-5;
    for rho in [0.8, 0.9, 0.97] {
        let (u, u1, u2) = sol.radial_derivatives(rho);
        let f = |r| sol.eval_at_radius(r);
        assert!((u - f(rho)).abs() <= 1e-15);
        assert!((u1 - (f(rho + eps) - f(rho - eps)) / (2.0 * eps)).abs() <= 1e-7 * u1.abs().max(1.0));
        assert!((u2 - (f(rho + eps) - 2.0 * u + f(rho - eps)) / (eps * eps)).abs() <= 1e-4 * u2.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn radial_solution_is_monotone_and_vanishes_on_the_core(
        gamma in 0.0f64..2.9,
        lambda in 0.1f64..10.0,
        level in 0.01f64..1.0,
        xs in prop::collection::vec(0.0f64..1.0, 2..20),
    ) {
        let c = level * tau(lambda, gamma).unwrap();
        let sol = make_radial(Point::ORIGIN, 1.0, c, lambda, gamma).unwrap();
        let mut rs = xs;
        rs.sort_by(f64::total_cmp);
        let values: Vec<f64> = rs.iter().map(|&r| eval_radial(&sol, Point::new(r, 0.0))).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        for (&r, &v) in rs.iter().zip(&values) {
            prop_assert!(v >= 0.0);
            if r <= sol.core_radius {
                prop_assert_eq!(v, 0.0);
            }
        }
        prop_assert!((sol.eval_at_radius(1.0) - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn radial_solution_is_rotation_invariant(angle in 0.0f64..std::f64::consts::TAU, r in 0.0f64..1.0) {
        let sol = make_radial(Point::ORIGIN, 1.0, 0.1, 1.0, 1.0).unwrap();
        let a = eval_radial(&sol, Point::new(r, 0.0));
        let b = eval_radial(&sol, Point::new(r * angle.cos(), r * angle.sin()));
        prop_assert!((a - b).abs() <= 1e-14);
    }

    #[test]
    fn plateau_criterion_is_antitone(
        gamma in 0.0f64..2.9,
        lambda in 0.1f64..10.0,
        radius in 0.01f64..2.0,
        a in 0.0f64..10.0,
        b in 0.0f64..10.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let threshold = tau(lambda, gamma).unwrap() * radius.powf(growth_exponent(gamma).unwrap());
        let (lo, hi) = (lo * threshold, hi * threshold);
        if plateau_criterion(hi, radius, lambda, gamma).unwrap() {
            prop_assert!(plateau_criterion(lo, radius, lambda, gamma).unwrap());
        }
    }

    #[test]
    fn modulus_inverts_tau(gamma in 0.0f64..2.9, lambda in 0.01f64..100.0) {
        let back = modulus_for_tau(tau(lambda, gamma).unwrap(), gamma).unwrap();
        prop_assert!((back - lambda).abs() <= 1e-10 * lambda);
    }

    #[test]
    fn barrier_laplacian_matches_finite_differences(
        gamma in 0.0f64..2.9,
        c in 0.1f64..2.0,
        x in 0.3f64..1.0,
        y in -1.0f64..1.0,
    ) {
        // Δ∞ψ = ψ_ρρ ψ_ρ² for a radial function
        let x0 = Point::ORIGIN;
        let p = Point::new(x, y);
        let rho = p.norm();
        let eps = 1e-4 * rho;
        let f = |r: f64| barrier_psi(c, gamma, Point::new(r, 0.0), x0).unwrap().0;
        let d1 = (f(rho + eps) - f(rho - eps)) / (2.0 * eps);
        let d2 = (f(rho + eps) - 2.0 * f(rho) + f(rho - eps)) / (eps * eps);
        let (_, lap) = barrier_psi(c, gamma, p, x0).unwrap();
        prop_assert!((d2 * d1 * d1 - lap).abs() <= 1e-4 * lap.abs().max(1e-12));
    }

    #[test]
    fn envelope_core_matches_its_radius(theta in 0.05f64..0.95, gamma in 0.0f64..2.9) {
        let core = liouville_core_radius(theta, 1.0, gamma);
        let inside = liouville_envelope(theta, 1.0, 1.0, gamma, Point::new(0.999 * core, 0.0)).unwrap();
        let outside = liouville_envelope(theta, 1.0, 1.0, gamma, Point::new(core + 0.01, 0.0)).unwrap();
        prop_assert_eq!(inside, 0.0);
        prop_assert!(outside > 0.0);
        let edge = liouville_envelope(theta, 1.0, 1.0, gamma, Point::new(1.0, 0.0)).unwrap();
        prop_assert!((edge - theta * tau(1.0, gamma).unwrap()).abs() <= 1e-12);
    }
}
