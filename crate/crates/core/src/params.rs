//! Problem coefficients and scheme configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ScalarField;
use crate::grid::Grid;

pub const DEFAULT_TOL_UPDATE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("gamma = {0} outside [0, 3)")]
    GammaOutOfRange(f64),
    #[error("gamma = 3 (critical absorption) is not supported by this operation")]
    CriticalNotAllowed,
    #[error("Thiele modulus must be finite and nonnegative, found {value} at node {node}")]
    NegativeLambda { node: usize, value: f64 },
    #[error("Thiele modulus field lives on a different grid")]
    LambdaGridMismatch,
    #[error("tolerances must be positive (tol_update = {tol_update}, tol_residual = {tol_residual})")]
    NonPositiveTolerance { tol_update: f64, tol_residual: f64 },
    #[error("max_sweeps must be at least 1")]
    ZeroSweeps,
}

/// Discretisation of the infinity Laplacian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Monotone max/min increments over the 8-neighbour stencil.
    #[default]
    #[serde(rename = "minmax")]
    MinMaxStencil,
    /// Central-difference gradient plus an interpolated second difference
    /// along the gradient direction.
    #[serde(rename = "interp")]
    DirectionInterp,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minmax" => Ok(Scheme::MinMaxStencil),
            "interp" => Ok(Scheme::DirectionInterp),
            other => Err(format!("unknown scheme {other:?} (expected minmax or interp)")),
        }
    }
}

/// Thiele modulus: a constant or one value per node.
#[derive(Clone, Debug, PartialEq)]
pub enum ThieleModulus {
    Constant(f64),
    Field(ScalarField),
}

impl ThieleModulus {
    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        match self {
            ThieleModulus::Constant(l) => *l,
            ThieleModulus::Field(f) => f.at(k),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            ThieleModulus::Constant(l) => *l,
            ThieleModulus::Field(f) => f.max(),
        }
    }

    /// Multiply every nodal value by `s`.
    pub fn scaled(&self, s: f64) -> ThieleModulus {
        match self {
            ThieleModulus::Constant(l) => ThieleModulus::Constant(l * s),
            ThieleModulus::Field(f) => ThieleModulus::Field(
                f.map(|_, v| v * s).expect("scaling a finite field by a finite factor"),
            ),
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), ParamsError> {
        match self {
            ThieleModulus::Constant(l) => {
                if !(l.is_finite() && *l >= 0.0) {
                    return Err(ParamsError::NegativeLambda { node: 0, value: *l });
                }
            }
            ThieleModulus::Field(f) => {
                if f.grid() != grid {
                    return Err(ParamsError::LambdaGridMismatch);
                }
                if let Some(k) = f.values().iter().position(|v| !(*v >= 0.0)) {
                    return Err(ParamsError::NegativeLambda {
                        node: k,
                        value: f.at(k),
                    });
                }
            }
        }
        Ok(())
    }
}

impl From<f64> for ThieleModulus {
    fn from(l: f64) -> Self {
        ThieleModulus::Constant(l)
    }
}

/// `(t^+)^gamma`, with the convention that the source vanishes where `t <= 0`
/// (so `gamma = 0` gives the indicator of `{t > 0}`).
#[inline]
pub fn absorption(t: f64, gamma: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if gamma == 0.0 {
        1.0
    } else if gamma == 1.0 {
        t
    } else {
        t.powf(gamma)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub gamma: f64,
    pub lambda: ThieleModulus,
    pub scheme: Scheme,
    pub tol_residual: f64,
    pub tol_update: f64,
    pub max_sweeps: usize,
}

impl Params {
    /// Parameters with the default tolerances for a problem on `grid` whose
    /// boundary data has sup norm `data_sup`.
    ///
    /// `tol_update = 1e-10`, `tol_residual = 1e-8 max(1, |phi|^gamma lambda_max)`,
    /// `max_sweeps = 100 max(nx, ny)`.
    pub fn with_defaults(grid: &Grid, gamma: f64, lambda: impl Into<ThieleModulus>, data_sup: f64) -> Self {
        let lambda = lambda.into();
        let source_scale = absorption(data_sup, gamma) * lambda.max();
        Params {
            gamma,
            scheme: Scheme::default(),
            tol_residual: 1e-8 * source_scale.max(1.0),
            tol_update: DEFAULT_TOL_UPDATE,
            max_sweeps: 100 * grid.nx().max(grid.ny()),
            lambda,
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda.max()
    }

    pub fn is_critical(&self) -> bool {
        self.gamma == 3.0
    }

    /// Check the invariants; `allow_critical` admits `gamma = 3`.
    pub fn validate(&self, grid: &Grid, allow_critical: bool) -> Result<(), ParamsError> {
        if !(self.gamma >= 0.0 && self.gamma <= 3.0) {
            return Err(ParamsError::GammaOutOfRange(self.gamma));
        }
        if self.gamma == 3.0 && !allow_critical {
            return Err(ParamsError::CriticalNotAllowed);
        }
        self.lambda.validate(grid)?;
        if !(self.tol_update > 0.0 && self.tol_residual > 0.0) {
            return Err(ParamsError::NonPositiveTolerance {
                tol_update: self.tol_update,
                tol_residual: self.tol_residual,
            });
        }
        if self.max_sweeps == 0 {
            return Err(ParamsError::ZeroSweeps);
        }
        Ok(())
    }
}
