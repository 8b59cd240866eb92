//! JSON problem specifications.
//!
//! ```json
//! {
//!   "domain": { "origin": [-1, -1], "extent": [2, 2] },
//!   "resolution": 129,
//!   "gamma": 1,
//!   "lambda": 1,
//!   "boundary": "ball 1,0.0883883",
//!   "scheme": "minmax",
//!   "tolerances": { "tol_update": 1e-10 }
//! }
//! ```
//!
//! `lambda` is a number or `{"field": "lambda.csv"}`, a field CSV on the same
//! grid; relative paths are resolved against the specification's directory.
//! `boundary` is `"constant c"`, `"ball R,c"` (ball about the domain centre,
//! data `c` outside it) or `"expression id"` with `id` one of
//! [`EXPRESSIONS`].

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::analytic;
use crate::field::{sample_function, ScalarField};
use crate::grid::{BallSpec, Grid, Point};
use crate::params::{Params, Scheme, ThieleModulus};
use crate::solver::{Problem, SolveError};

/// Named boundary expressions.
///
/// - `planar`: `τ x₊^{4/(3-γ)}`, an exact solution for constant λ.
/// - `cone`: distance to the domain centre.
pub const EXPRESSIONS: [&str; 2] = ["planar", "cone"];

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad problem specification: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad boundary {0:?}: expected \"constant c\", \"ball R,c\" or \"expression id\"")]
    Boundary(String),
    #[error("unknown expression {0:?}")]
    Expression(String),
    #[error("the planar expression needs a constant lambda")]
    PlanarNeedsConstant,
    #[error("lambda field {path}: {reason}")]
    LambdaField { path: PathBuf, reason: String },
    #[error(transparent)]
    Analytic(#[from] analytic::AnalyticError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Resolution {
    Square(usize),
    Nodes([usize; 2]),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum LambdaSpec {
    Constant(f64),
    Field { field: PathBuf },
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub tol_update: Option<f64>,
    pub tol_residual: Option<f64>,
    pub max_sweeps: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub resolution: Resolution,
    pub gamma: f64,
    pub lambda: LambdaSpec,
    pub boundary: String,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Parsed `boundary` entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary {
    Constant(f64),
    Ball { radius: f64, c: f64 },
    Expression(&'static str),
}

impl std::str::FromStr for Boundary {
    type Err = ProblemFileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProblemFileError::Boundary(s.to_string());
        let (kind, rest) = s.trim().split_once(char::is_whitespace).ok_or_else(bad)?;
        let rest = rest.trim();
        match kind {
            "constant" => Ok(Boundary::Constant(rest.parse().map_err(|_| bad())?)),
            "ball" => {
                let (r, c) = rest.split_once(',').ok_or_else(bad)?;
                Ok(Boundary::Ball {
                    radius: r.trim().parse().map_err(|_| bad())?,
                    c: c.trim().parse().map_err(|_| bad())?,
                })
            }
            "expression" => EXPRESSIONS
                .iter()
                .find(|e| **e == rest)
                .map(|e| Boundary::Expression(e))
                .ok_or_else(|| ProblemFileError::Expression(rest.to_string())),
            _ => Err(bad()),
        }
    }
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, ProblemFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn grid(&self) -> Result<Grid, ProblemFileError> {
        let resolution = match self.resolution {
            Resolution::Square(n) => [n, n],
            Resolution::Nodes(r) => r,
        };
        let origin = Point::new(self.domain.origin[0], self.domain.origin[1]);
        Ok(Grid::new(origin, self.domain.extent, resolution).map_err(SolveError::from)?)
    }

    /// Centre of the domain rectangle.
    pub fn center(&self) -> Point {
        let d = &self.domain;
        Point::new(d.origin[0] + 0.5 * d.extent[0], d.origin[1] + 0.5 * d.extent[1])
    }

    /// Build the problem; `base` resolves a relative lambda-field path.
    pub fn build(&self, base: &Path) -> Result<Problem, ProblemFileError> {
        let grid = self.grid()?;
        let lambda = match &self.lambda {
            LambdaSpec::Constant(l) => ThieleModulus::Constant(*l),
            LambdaSpec::Field { field } => ThieleModulus::Field(load_lambda(&grid, &base.join(field))?),
        };
        let boundary: Boundary = self.boundary.parse()?;
        let center = self.center();
        let data = match boundary {
            Boundary::Constant(c) | Boundary::Ball { c, .. } => ScalarField::constant(&grid, c),
            Boundary::Expression("planar") => {
                let ThieleModulus::Constant(l) = lambda else {
                    return Err(ProblemFileError::PlanarNeedsConstant);
                };
                let tau = analytic::tau(l, self.gamma)?;
                let alpha = analytic::growth_exponent(self.gamma)?;
                sample_function(&grid, |p| tau * p.x.max(0.0).powf(alpha))
                    .map_err(|e| SolveError::InvalidProblem(e.to_string()))?
            }
            Boundary::Expression(_) => sample_function(&grid, |p| p.dist(center))
                .map_err(|e| SolveError::InvalidProblem(e.to_string()))?,
        };
        let mut params = Params::with_defaults(&grid, self.gamma, lambda, data.max());
        params.scheme = self.scheme;
        if let Some(t) = self.tolerances.tol_update {
            params.tol_update = t;
        }
        if let Some(t) = self.tolerances.tol_residual {
            params.tol_residual = t;
        }
        if let Some(n) = self.tolerances.max_sweeps {
            params.max_sweeps = n;
        }
        let problem = match boundary {
            Boundary::Ball { radius, c } => Problem::ball(&grid, BallSpec::new(center, radius), c, params)?,
            _ => Problem::new(data, params)?,
        };
        Ok(if self.gamma == 3.0 { problem.allow_critical() } else { problem })
    }
}

/// Read a lambda field whose CSV lists the nodes of `grid`, in grid order.
fn load_lambda(grid: &Grid, path: &Path) -> Result<ScalarField, ProblemFileError> {
    let err = |reason: String| ProblemFileError::LambdaField { path: path.to_path_buf(), reason };
    let field = ScalarField::load_csv(path).map_err(|e| err(e.to_string()))?;
    let g = field.grid();
    if g.nx() != grid.nx() || g.ny() != grid.ny() {
        return Err(err(format!("{}x{} nodes, problem has {}x{}", g.nx(), g.ny(), grid.nx(), grid.ny())));
    }
    if g.origin().dist(grid.origin()) > 1e-6 * grid.h() || (g.h() - grid.h()).abs() > 1e-9 * grid.h() {
        return Err(err("grid differs from the problem domain".into()));
    }
    ScalarField::from_values(grid.clone(), field.into_values()).map_err(|e| err(e.to_string()))
}

/// Read and build a specification file.
pub fn load_problem(path: &Path) -> Result<(ProblemSpec, Problem), ProblemFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemFileError::Io { path: path.to_path_buf(), source })?;
    let spec = ProblemSpec::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let problem = spec.build(base)?;
    Ok((spec, problem))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_forms() {
        assert_eq!("constant 0.5".parse::<Boundary>().unwrap(), Boundary::Constant(0.5));
        assert_eq!(
            "ball 1, 0.25".parse::<Boundary>().unwrap(),
            Boundary::Ball { radius: 1.0, c: 0.25 }
        );
        assert_eq!("expression cone".parse::<Boundary>().unwrap(), Boundary::Expression("cone"));
        assert!("expression nope".parse::<Boundary>().is_err());
        assert!("ball 1".parse::<Boundary>().is_err());
        assert!("disk 1,2".parse::<Boundary>().is_err());
    }

    #[test]
    fn builds_a_ball_problem() {
        let spec = ProblemSpec::from_json(
            r#"{"domain": {"origin": [-1, -1], "extent": [2, 2]}, "resolution": 17,
                "gamma": 1, "lambda": 2, "boundary": "ball 1,0.3",
                "tolerances": {"max_sweeps": 50}}"#,
        )
        .unwrap();
        let p = spec.build(Path::new(".")).unwrap();
        assert_eq!(p.grid().nx(), 17);
        assert_eq!(p.params.max_sweeps, 50);
        assert_eq!(p.params.lambda, ThieleModulus::Constant(2.0));
        // centre free, corners fixed
        assert!(!p.fixed_mask()[p.grid().index(crate::grid::NodeIndex::new(8, 8))]);
        assert!(p.fixed_mask()[p.grid().index(crate::grid::NodeIndex::new(1, 1))]);
    }

    #[test]
    fn rejects_unknown_keys() {
        let r = ProblemSpec::from_json(
            r#"{"domain": {"origin": [0, 0], "extent": [1, 1]}, "resolution": 9,
                "gamma": 1, "lambda": 1, "boundary": "constant 1", "colour": 3}"#,
        );
        assert!(matches!(r, Err(ProblemFileError::Parse(_))));
    }
}
