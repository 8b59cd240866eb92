//! Closed-form objects for `Δ∞u = λ (u⁺)^γ`.
//!
//! The radial profile `h(s) = τ s^{4/(3-γ)}` solves `h'' (h')² = λ h^γ` with
//!
//! ```text
//! τ(λ, γ) = (λ (3-γ)⁴ / (64 (1+γ)))^{1/(3-γ)},
//! ```
//!
//! and shifting it by the width `T = (c/τ)^{(3-γ)/4}` gives the exact dead-core
//! solution on a ball `B_R` with boundary level `c`: zero on `B_{R-T}` and
//! `τ (|X - X₀| - R + T)^{4/(3-γ)}` outside. Everything here is pure and cheap;
//! these functions double as oracles for the solver and geometry tests.

use serde::Serialize;
use thiserror::Error;

use crate::grid::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("gamma = {0} is critical or out of range; closed forms need 0 <= gamma < 3")]
    CriticalGamma(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("barrier evaluated at its own centre")]
    SingularPoint,
}

fn check_gamma(gamma: f64) -> Result<(), AnalyticError> {
    if (0.0..3.0).contains(&gamma) {
        Ok(())
    } else {
        Err(AnalyticError::CriticalGamma(gamma))
    }
}

fn positive(name: &str, v: f64) -> Result<(), AnalyticError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AnalyticError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// The profile coefficient `τ(λ, γ)`.
pub fn tau(lambda: f64, gamma: f64) -> Result<f64, AnalyticError> {
    check_gamma(gamma)?;
    positive("lambda", lambda)?;
    let k = 3.0 - gamma;
    Ok((lambda * k.powi(4) / (64.0 * (1.0 + gamma))).powf(1.0 / k))
}

/// Inverse of [`tau`]: the modulus `λ = τ^{3-γ} 64(1+γ)/(3-γ)⁴`.
pub fn modulus_for_tau(tau: f64, gamma: f64) -> Result<f64, AnalyticError> {
    check_gamma(gamma)?;
    positive("tau", tau)?;
    let k = 3.0 - gamma;
    Ok(tau.powf(k) * 64.0 * (1.0 + gamma) / k.powi(4))
}

/// Sharp growth exponent `4/(3-γ)` of solutions off their plateau.
pub fn growth_exponent(gamma: f64) -> Result<f64, AnalyticError> {
    check_gamma(gamma)?;
    Ok(4.0 / (3.0 - gamma))
}

/// The exact radially symmetric solution on `B_R(center)` with boundary level `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialSolution {
    pub center: Point,
    pub outer_radius: f64,
    pub boundary_level: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Profile width `T = (c/τ)^{(3-γ)/4}`.
    pub width: f64,
    /// `max(R - T, 0)`.
    pub core_radius: f64,
    /// `R > T`, the dead-core compatibility condition.
    pub has_dead_core: bool,
}

pub fn make_radial(
    center: Point,
    outer_radius: f64,
    boundary_level: f64,
    lambda: f64,
    gamma: f64,
) -> Result<RadialSolution, AnalyticError> {
    positive("R", outer_radius)?;
    positive("c", boundary_level)?;
    let tau = tau(lambda, gamma)?;
    let width = (boundary_level / tau).powf((3.0 - gamma) / 4.0);
    Ok(RadialSolution {
        center,
        outer_radius,
        boundary_level,
        lambda,
        gamma,
        tau,
        width,
        core_radius: (outer_radius - width).max(0.0),
        has_dead_core: outer_radius > width,
    })
}

impl RadialSolution {
    pub fn alpha(&self) -> f64 {
        4.0 / (3.0 - self.gamma)
    }

    /// Distance-from-core coordinate `s = |X - X₀| - R + T` (may be negative).
    fn shifted(&self, rho: f64) -> f64 {
        rho - self.outer_radius + self.width
    }

    /// Value at distance `rho` from the centre.
    pub fn eval_at_radius(&self, rho: f64) -> f64 {
        let s = self.shifted(rho);
        if s <= 0.0 {
            0.0
        } else {
            self.tau * s.powf(self.alpha())
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.eval_at_radius(x.dist(self.center))
    }

    /// `(u, u_ρ, u_ρρ)` along a ray, from the hard-coded profile derivatives.
    pub fn radial_derivatives(&self, rho: f64) -> (f64, f64, f64) {
        let s = self.shifted(rho);
        if s <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        profile_derivatives(self.tau, self.alpha(), s)
    }
}

/// Evaluate a [`RadialSolution`] at `x`.
pub fn eval_radial(sol: &RadialSolution, x: Point) -> f64 {
    sol.eval(x)
}

fn profile_derivatives(tau: f64, alpha: f64, s: f64) -> (f64, f64, f64) {
    let h = tau * s.powf(alpha);
    let h1 = tau * alpha * s.powf(alpha - 1.0);
    let h2 = tau * alpha * (alpha - 1.0) * s.powf(alpha - 2.0);
    (h, h1, h2)
}

/// `h''(s) h'(s)² - λ h(s)^γ` for `h = τ s^{4/(3-γ)}`; zero up to rounding.
pub fn ode_residual(lambda: f64, gamma: f64, s: f64) -> Result<f64, AnalyticError> {
    positive("s", s)?;
    let tau = tau(lambda, gamma)?;
    let (h, h1, h2) = profile_derivatives(tau, 4.0 / (3.0 - gamma), s);
    Ok(h2 * h1 * h1 - lambda * h.powf(gamma))
}

/// Moduli of the reference lattice on which the profile identity is checked.
pub const LAMBDA_LATTICE: [f64; 3] = [0.1, 1.0, 10.0];
/// Exponents of the reference lattice.
pub const GAMMA_LATTICE: [f64; 6] = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5];

/// Largest `|u'' (u')² - λ u^γ| / (λ u^γ)` along a ray of `sol`, over
/// `samples` radii evenly spaced in the open positive shell `(R - T, R]`.
pub fn ray_ode_residual(sol: &RadialSolution, samples: usize) -> f64 {
    let inner = sol.outer_radius - sol.width.min(sol.outer_radius);
    (1..=samples)
        .map(|i| {
            let rho = inner + (sol.outer_radius - inner) * i as f64 / samples as f64;
            let (h, h1, h2) = sol.radial_derivatives(rho);
            let rhs = sol.lambda * h.powf(sol.gamma);
            (h2 * h1 * h1 - rhs).abs() / rhs
        })
        .fold(0.0, f64::max)
}

/// Sufficient condition for `X₀` to be a plateau point: `sup_{B_R(X₀)} u < τ R^{4/(3-γ)}`.
pub fn plateau_criterion(sup_r: f64, radius: f64, lambda: f64, gamma: f64) -> Result<bool, AnalyticError> {
    positive("R", radius)?;
    let threshold = tau(lambda, gamma)? * radius.powf(growth_exponent(gamma)?);
    Ok(sup_r < threshold)
}

/// `τ |X|^{4/(3-γ)}`: the entire solution attaining equality in the Liouville bound.
pub fn equality_profile(lambda: f64, gamma: f64, x: Point) -> Result<f64, AnalyticError> {
    Ok(tau(lambda, gamma)? * x.norm().powf(growth_exponent(gamma)?))
}

/// `τ (|X| - (1 - θ^{(3-γ)/4}) R)₊^{4/(3-γ)}`: the radial solution on `B_R` whose
/// boundary level is `θ τ R^{4/(3-γ)}`.
pub fn liouville_envelope(
    theta: f64,
    radius: f64,
    lambda: f64,
    gamma: f64,
    x: Point,
) -> Result<f64, AnalyticError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(AnalyticError::InvalidParameter(format!("theta must lie in (0, 1), got {theta}")));
    }
    positive("R", radius)?;
    let tau = tau(lambda, gamma)?;
    let core = (1.0 - theta.powf((3.0 - gamma) / 4.0)) * radius;
    let s = x.norm() - core;
    Ok(if s <= 0.0 { 0.0 } else { tau * s.powf(4.0 / (3.0 - gamma)) })
}

/// Core radius of [`liouville_envelope`]: `(1 - θ^{(3-γ)/4}) R`.
pub fn liouville_core_radius(theta: f64, radius: f64, gamma: f64) -> f64 {
    (1.0 - theta.powf((3.0 - gamma) / 4.0)) * radius
}

/// `ψ(X) = c |X - X₀|^α` with `α = 4/(3-γ)`, and its exact infinity Laplacian
/// `(cα)³ (α-1) |X - X₀|^{3α-4}`.
pub fn barrier_psi(c: f64, gamma: f64, x: Point, x0: Point) -> Result<(f64, f64), AnalyticError> {
    let alpha = growth_exponent(gamma)?;
    let rho = x.dist(x0);
    if rho == 0.0 {
        return Err(AnalyticError::SingularPoint);
    }
    let value = c * rho.powf(alpha);
    let lap = (c * alpha).powi(3) * (alpha - 1.0) * rho.powf(3.0 * alpha - 4.0);
    Ok((value, lap))
}

/// The annular barrier `Φ` with rate `lambda_b` and outer radius `d`, evaluated
/// at the offset `x` from its centre: constant `e^{-λ(d/2)²} - κ₀` on `B_{d/2}`,
/// `e^{-λ|x|²} - κ₀` on the annulus, zero outside, with `κ₀ = e^{-λ d²}`.
pub fn barrier_phi(lambda_b: f64, d: f64, x: Point) -> Result<f64, AnalyticError> {
    positive("lambda_b", lambda_b)?;
    positive("d", d)?;
    let kappa0 = (-lambda_b * d * d).exp();
    let rho = x.norm();
    Ok(if rho <= 0.5 * d {
        (-lambda_b * 0.25 * d * d).exp() - kappa0
    } else if rho <= d {
        (-lambda_b * rho * rho).exp() - kappa0
    } else {
        0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tau_reference_values() {
        assert_relative_eq!(tau(1.0, 1.0).unwrap(), 0.125f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(tau(1.0, 2.0).unwrap(), 1.0 / 192.0, max_relative = 1e-15);
        assert_relative_eq!(tau(1.0, 0.0).unwrap(), (81.0f64 / 64.0).cbrt(), max_relative = 1e-15);
        assert!(matches!(tau(1.0, 3.0), Err(AnalyticError::CriticalGamma(_))));
        assert!(tau(0.0, 1.0).is_err());
    }

    #[test]
    fn growth_exponents() {
        assert_relative_eq!(growth_exponent(0.0).unwrap(), 4.0 / 3.0);
        assert_eq!(growth_exponent(1.0).unwrap(), 2.0);
        assert_eq!(growth_exponent(2.0).unwrap(), 4.0);
        assert!(growth_exponent(3.0).is_err());
    }

    #[test]
    fn radial_dead_core_examples() {
        let t = tau(1.0, 1.0).unwrap();
        let sol = make_radial(Point::ORIGIN, 1.0, 0.25 * t, 1.0, 1.0).unwrap();
        assert_relative_eq!(sol.width, 0.5, max_relative = 1e-14);
        assert_relative_eq!(sol.core_radius, 0.5, max_relative = 1e-14);
        assert!(sol.has_dead_core);
        assert_eq!(sol.eval(Point::new(0.3, 0.0)), 0.0);
        assert_relative_eq!(sol.eval(Point::new(0.0, 1.0)), 0.25 * t, max_relative = 1e-14);
        assert_relative_eq!(sol.eval(Point::new(0.75, 0.0)), t * 0.0625, max_relative = 1e-14);

        let edge = make_radial(Point::ORIGIN, 1.0, t, 1.0, 1.0).unwrap();
        assert_relative_eq!(edge.width, 1.0, max_relative = 1e-15);
        assert_eq!(edge.core_radius, 0.0);
        assert!(!edge.has_dead_core);

        let t0 = tau(1.0, 0.0).unwrap();
        let g0 = make_radial(Point::ORIGIN, 2.0, t0, 1.0, 0.0).unwrap();
        assert_relative_eq!(g0.width, 1.0, max_relative = 1e-14);
        assert_relative_eq!(g0.core_radius, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn ode_residual_examples() {
        let t = tau(1.0, 1.0).unwrap();
        // h'' (h')² = 2τ · 4τ² = 8τ³ = τ at s = 1
        assert_relative_eq!(8.0 * t.powi(3), t, max_relative = 1e-14);
        assert!(ode_residual(1.0, 1.0, 1.0).unwrap().abs() <= 1e-12);
        assert!(ode_residual(1.0, 0.0, 0.5).unwrap().abs() <= 1e-12);
        let s: f64 = 2.0;
        let rhs = 5.0 * (tau(5.0, 2.0).unwrap() * s.powi(4)).powi(2);
        assert!(ode_residual(5.0, 2.0, s).unwrap().abs() <= 1e-9 * rhs);
    }

    #[test]
    fn plateau_criterion_is_strict() {
        let (l, g) = (1.0, 1.0);
        let t = tau(l, g).unwrap();
        assert!(plateau_criterion(0.3 * t, 1.0, l, g).unwrap());
        assert!(!plateau_criterion(t, 1.0, l, g).unwrap());
        assert!(plateau_criterion(0.0, 0.4, l, g).unwrap());
        assert!(plateau_criterion(0.0, 1.0, l, 3.0).is_err());
    }

    #[test]
    fn liouville_envelope_examples() {
        let t = tau(1.0, 1.0).unwrap();
        let core = 1.0 - 0.5f64.sqrt();
        assert_eq!(liouville_envelope(0.5, 1.0, 1.0, 1.0, Point::new(core - 1e-9, 0.0)).unwrap(), 0.0);
        assert_relative_eq!(liouville_core_radius(0.5, 1.0, 1.0), core, max_relative = 1e-15);
        assert_relative_eq!(
            liouville_envelope(0.5, 1.0, 1.0, 1.0, Point::new(0.0, 1.0)).unwrap(),
            t / 2.0,
            max_relative = 1e-14
        );
        let x = Point::new(0.6, 0.3);
        let near = liouville_envelope(0.999, 1.0, 1.0, 1.0, x).unwrap();
        assert!((near - equality_profile(1.0, 1.0, x).unwrap()).abs() < 1e-2);
        assert!(liouville_envelope(1.0, 1.0, 1.0, 1.0, x).is_err());
    }

    #[test]
    fn barrier_psi_examples() {
        let t = tau(1.0, 1.0).unwrap();
        let x0 = Point::new(0.2, -0.1);
        let x = x0 + Point::new(0.6, 0.8);
        let (v, lap) = barrier_psi(t, 1.0, x, x0).unwrap();
        assert_relative_eq!(lap, 8.0 * t.powi(3), max_relative = 1e-14);
        assert_relative_eq!(lap, v, max_relative = 1e-14); // λ ψ^γ with λ = γ = 1

        let (v, lap) = barrier_psi(0.9 * t, 1.0, x, x0).unwrap();
        assert_relative_eq!(lap, 8.0 * (0.9 * t).powi(3), max_relative = 1e-14);
        assert!(lap < v);

        let (_, a) = barrier_psi(1.0, 0.0, Point::new(0.1, 0.0), Point::ORIGIN).unwrap();
        let (_, b) = barrier_psi(1.0, 0.0, Point::new(3.0, 0.0), Point::ORIGIN).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        assert_eq!(barrier_psi(1.0, 1.0, x0, x0), Err(AnalyticError::SingularPoint));
    }

    #[test]
    fn barrier_phi_examples() {
        let (lb, d) = (4.0, 0.5);
        assert!(barrier_phi(lb, d, Point::new(d, 0.0)).unwrap().abs() < 1e-16);
        let centre = barrier_phi(lb, d, Point::ORIGIN).unwrap();
        assert_relative_eq!(centre, (-lb * d * d / 4.0).exp() - (-lb * d * d).exp(), max_relative = 1e-15);
        assert!(centre > 0.0);
        assert_eq!(barrier_phi(lb, d, Point::new(0.0, 2.0 * d)).unwrap(), 0.0);
        // continuous across the inner seam
        let a = barrier_phi(lb, d, Point::new(0.5 * d, 0.0)).unwrap();
        let b = barrier_phi(lb, d, Point::new(0.5 * d + 1e-12, 0.0)).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}
