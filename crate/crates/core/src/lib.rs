//! Finite-difference solver and diagnostics for the dead-core problem
//! `Δ∞u = λ (u⁺)^γ` in two dimensions.

pub mod analytic;
pub mod fbgeom;
pub mod field;
pub mod grid;
pub mod operator;
pub mod params;
pub mod problem_file;
pub mod solver;
pub mod verify;

pub use analytic::{eval_radial, make_radial, ode_residual, ray_ode_residual, tau, AnalyticError, RadialSolution};
pub use fbgeom::{
    analyze_free_boundary, box_dimension, core_radius, dyadic_flatness_check, extract_plateau, fit_growth_exponent, porosity_witness,
    positive_density, sup_over_balls, FbGeomError, FreeBoundaryReport, PlateauMask,
};
pub use field::{sample_function, FieldError, ScalarField};
pub use grid::{make_grid, BallSpec, Grid, GridError, NodeIndex, Point};
pub use operator::{gradient, infinity_laplacian, residual_field, stencil_value, OperatorError, StencilValue};
pub use params::{absorption, Params, ParamsError, Scheme, ThieleModulus};
pub use solver::{
    initial_bounds, node_update, solve, solve_from, solve_infinity_harmonic, solve_with, Problem, Solution, SolveError,
    SolveOptions, SolveReport,
};
