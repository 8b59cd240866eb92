//! Discrete infinity Laplacian `Δ∞u = (Du)ᵀ D²u Du` on a [`ScalarField`].
//!
//! Two discretisations are provided.
//!
//! * [`Scheme::MinMaxStencil`] works on the 8-neighbour stencil. For each
//!   neighbour `q` at distance `d_q` let `δ_q = u_q - u`. With
//!   `P = max_q δ_q³ / d_q⁴` and `N = max_q (-δ_q)³ / d_q⁴` the operator is
//!   `(P - N) / 3`. Along a stencil line this is `(S⁺³ - S⁻³) / (3d)` with the
//!   one-sided slopes `S± = ±(u(x ± dv) - u)/d`, i.e. `|Du|² ∂²_vv u + O(d²)`.
//!   Each of `P` and `-N` is nondecreasing in every neighbour and nonincreasing
//!   in the centre value, so the scheme is degenerate elliptic; the solver
//!   relies on this. The price of the narrow stencil is that the gradient
//!   direction is resolved only to the nearest stencil direction.
//! * [`Scheme::DirectionInterp`] takes the central-difference gradient `g`,
//!   samples `u(X ± hξ)` along `ξ = g/|g|` with tensor-product cubic Lagrange
//!   interpolation and returns `|g|² (u(X+hξ) + u(X-hξ) - 2u(X)) / h²`. It is
//!   not monotone but is consistent in every direction, and serves as the
//!   accuracy reference.

use thiserror::Error;

use crate::field::ScalarField;
use crate::grid::{Grid, NodeIndex, Point};
use crate::params::{absorption, Params, ParamsError, Scheme};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("node ({i}, {j}) is on the grid boundary")]
    BoundaryNode { i: usize, j: usize },
    #[error("node ({i}, {j}) is outside the grid")]
    OutOfRange { i: usize, j: usize },
    #[error("interpolation point for node ({i}, {j}) leaves the grid hull")]
    OutOfHull { i: usize, j: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// King-move offsets: four axis neighbours, then four diagonals.
pub(crate) const KING_OFFSETS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

/// `h⁴ / d_q⁴` for each offset.
pub(crate) const KING_WEIGHTS: [f64; 8] = [1.0, 1.0, 1.0, 1.0, 0.25, 0.25, 0.25, 0.25];

#[inline]
pub(crate) fn cube(x: f64) -> f64 {
    x * x * x
}

/// `(P, N, argmax P, argmax N)` in units of `h⁻⁴`: the scaled max/min increments.
#[inline]
pub(crate) fn minmax_increments(center: f64, nbrs: &[f64; 8]) -> (f64, f64, usize, usize) {
    let mut p = f64::NEG_INFINITY;
    let mut n = f64::NEG_INFINITY;
    let (mut ap, mut an) = (0, 0);
    for q in 0..8 {
        let d = nbrs[q] - center;
        let w = KING_WEIGHTS[q];
        let up = w * cube(d);
        let dn = -up;
        if up > p {
            p = up;
            ap = q;
        }
        if dn > n {
            n = dn;
            an = q;
        }
    }
    (p, n, ap, an)
}

#[inline]
pub(crate) fn gather_neighbors(values: &[f64], nx: usize, k: usize) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (q, &(di, dj)) in KING_OFFSETS.iter().enumerate() {
        let kk = (k as isize + di + dj * nx as isize) as usize;
        out[q] = values[kk];
    }
    out
}

/// Min/max stencil value at linear index `k` (must be interior).
#[inline]
pub(crate) fn minmax_at(values: &[f64], nx: usize, h: f64, k: usize) -> f64 {
    let nbrs = gather_neighbors(values, nx, k);
    let (p, n, _, _) = minmax_increments(values[k], &nbrs);
    (p - n) / (3.0 * h.powi(4))
}

/// Diagnostic breakdown of the stencil at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilValue {
    pub max_neighbor: f64,
    pub min_neighbor: f64,
    pub grad_estimate: [f64; 2],
    /// Second difference between the steepest-ascent and steepest-descent
    /// neighbours, each slope normalised by its own distance.
    pub second_diff_along_grad: f64,
}

fn check_interior(grid: &Grid, node: NodeIndex) -> Result<usize, OperatorError> {
    let NodeIndex { i, j } = node;
    if i >= grid.nx() || j >= grid.ny() {
        return Err(OperatorError::OutOfRange { i, j });
    }
    if grid.is_boundary(node) {
        return Err(OperatorError::BoundaryNode { i, j });
    }
    Ok(grid.index(node))
}

/// Central-difference gradient at an interior node.
pub fn gradient(field: &ScalarField, node: NodeIndex) -> Result<[f64; 2], OperatorError> {
    let grid = field.grid();
    let k = check_interior(grid, node)?;
    Ok(central_gradient(field.values(), grid.nx(), grid.h(), k))
}

#[inline]
fn central_gradient(v: &[f64], nx: usize, h: f64, k: usize) -> [f64; 2] {
    [(v[k + 1] - v[k - 1]) / (2.0 * h), (v[k + nx] - v[k - nx]) / (2.0 * h)]
}

pub fn stencil_value(field: &ScalarField, node: NodeIndex) -> Result<StencilValue, OperatorError> {
    let grid = field.grid();
    let k = check_interior(grid, node)?;
    let v = field.values();
    let nbrs = gather_neighbors(v, grid.nx(), k);
    let (_, _, ap, an) = minmax_increments(v[k], &nbrs);
    let dist = |q: usize| grid.h() * if q < 4 { 1.0 } else { std::f64::consts::SQRT_2 };
    let up = (nbrs[ap] - v[k]) / dist(ap);
    let down = (v[k] - nbrs[an]) / dist(an);
    Ok(StencilValue {
        max_neighbor: nbrs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_neighbor: nbrs.iter().copied().fold(f64::INFINITY, f64::min),
        grad_estimate: central_gradient(v, grid.nx(), grid.h(), k),
        second_diff_along_grad: (up - down) / (0.5 * (dist(ap) + dist(an))),
    })
}

/// Discrete `Δ∞u` at an interior node.
pub fn infinity_laplacian(field: &ScalarField, node: NodeIndex, scheme: Scheme) -> Result<f64, OperatorError> {
    let grid = field.grid();
    let k = check_interior(grid, node)?;
    match scheme {
        Scheme::MinMaxStencil => Ok(minmax_at(field.values(), grid.nx(), grid.h(), k)),
        Scheme::DirectionInterp => direction_interp_at(field, node, k),
    }
}

fn direction_interp_at(field: &ScalarField, node: NodeIndex, k: usize) -> Result<f64, OperatorError> {
    let grid = field.grid();
    let h = grid.h();
    let v = field.values();
    let g = central_gradient(v, grid.nx(), h, k);
    let gnorm = g[0].hypot(g[1]);
    // Below this cutoff the |Du|² factor makes the value negligible.
    if gnorm <= h * h {
        return Ok(0.0);
    }
    let xi = Point::new(g[0] / gnorm, g[1] / gnorm);
    let x = grid.position(node);
    let oob = || OperatorError::OutOfHull { i: node.i, j: node.j };
    let fwd = interpolate_cubic(field, x + xi * h).ok_or_else(oob)?;
    let bwd = interpolate_cubic(field, x - xi * h).ok_or_else(oob)?;
    Ok(gnorm * gnorm * (fwd + bwd - 2.0 * v[k]) / (h * h))
}

/// Lagrange weights for the (up to) four consecutive nodes around fractional
/// index `f`, clamped to `[0, n-1]`. Returns the first node and the weights.
fn lagrange_stencil(f: f64, n: usize) -> (usize, [f64; 4], usize) {
    let m = n.min(4);
    let base = (f.floor() as isize - 1).clamp(0, (n - m) as isize) as usize;
    let mut w = [0.0; 4];
    for a in 0..m {
        let xa = (base + a) as f64;
        let mut prod = 1.0;
        for b in 0..m {
            if b != a {
                let xb = (base + b) as f64;
                prod *= (f - xb) / (xa - xb);
            }
        }
        w[a] = prod;
    }
    (base, w, m)
}

/// Tensor-product cubic interpolation; `None` outside the grid rectangle.
pub fn interpolate_cubic(field: &ScalarField, p: Point) -> Option<f64> {
    let grid = field.grid();
    if !grid.contains(p) {
        return None;
    }
    let h = grid.h();
    let fx = ((p.x - grid.origin().x) / h).clamp(0.0, (grid.nx() - 1) as f64);
    let fy = ((p.y - grid.origin().y) / h).clamp(0.0, (grid.ny() - 1) as f64);
    let (bx, wx, mx) = lagrange_stencil(fx, grid.nx());
    let (by, wy, my) = lagrange_stencil(fy, grid.ny());
    let v = field.values();
    let mut acc = 0.0;
    for b in 0..my {
        let row = (by + b) * grid.nx();
        let mut racc = 0.0;
        for a in 0..mx {
            racc += wx[a] * v[row + bx + a];
        }
        acc += wy[b] * racc;
    }
    Some(acc)
}

/// `Δ∞u - λ (u⁺)^γ` at interior nodes, zero on the boundary.
pub fn residual_field(field: &ScalarField, params: &Params) -> Result<ScalarField, OperatorError> {
    let grid = field.grid();
    params.validate(grid, true)?;
    let mut out = vec![0.0; grid.len()];
    for node in grid.interior_nodes() {
        let k = grid.index(node);
        let lap = infinity_laplacian(field, node, params.scheme)?;
        out[k] = lap - params.lambda.at(k) * absorption(field.at(k), params.gamma);
    }
    Ok(ScalarField::from_values(grid.clone(), out).expect("residuals of a finite field are finite"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample_function;
    use crate::params::ThieleModulus;

    fn unit(n: usize) -> Grid {
        Grid::unit_square(n).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let g = unit(33);
        let node = NodeIndex::new(16, 16);
        let fx = sample_function(&g, |p| p.x).unwrap();
        let gr = gradient(&fx, node).unwrap();
        assert!((gr[0] - 1.0).abs() < 1e-13 && gr[1].abs() < 1e-13);
        let sq = sample_function(&g, |p| p.x * p.x).unwrap();
        assert!((gradient(&sq, node).unwrap()[0] - 1.0).abs() < 1e-13);
        let c = ScalarField::constant(&g, 3.0);
        assert_eq!(gradient(&c, node).unwrap(), [0.0, 0.0]);
        assert_eq!(
            gradient(&c, NodeIndex::new(0, 4)),
            Err(OperatorError::BoundaryNode { i: 0, j: 4 })
        );
    }

    #[test]
    fn linear_fields_have_zero_operator() {
        let g = unit(17);
        let f = sample_function(&g, |p| 0.3 * p.x - 1.7 * p.y).unwrap();
        for node in g.interior_nodes() {
            for scheme in [Scheme::MinMaxStencil, Scheme::DirectionInterp] {
                let v = infinity_laplacian(&f, node, scheme).unwrap();
                assert!(v.abs() < 1e-6, "{scheme:?} at {node:?}: {v}");
            }
        }
    }

    #[test]
    fn quadratic_along_axis() {
        let g = unit(33);
        let f = sample_function(&g, |p| p.x * p.x).unwrap();
        let node = NodeIndex::new(16, 9);
        let mm = infinity_laplacian(&f, node, Scheme::MinMaxStencil).unwrap();
        let h = g.h();
        // ((h + h²)³ - (h - h²)³) / (3h⁴) = 2 + 2h²/3
        assert!((mm - (2.0 + 2.0 * h * h / 3.0)).abs() < 1e-9);
        let di = infinity_laplacian(&f, node, Scheme::DirectionInterp).unwrap();
        assert!((di - 2.0).abs() < 1e-9);
    }

    #[test]
    fn stencil_diagnostics() {
        let g = unit(9);
        let f = sample_function(&g, |p| p.x * p.x).unwrap();
        let sv = stencil_value(&f, NodeIndex::new(4, 4)).unwrap();
        assert!(sv.max_neighbor >= sv.min_neighbor);
        assert!((sv.second_diff_along_grad - 2.0).abs() < 1e-9);
        assert!((sv.grad_estimate[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let g = unit(9);
        let f = sample_function(&g, |p| p.x.powi(3) - 2.0 * p.x * p.y * p.y + p.y.powi(3)).unwrap();
        for p in [Point::new(0.013, 0.77), Point::new(0.99, 0.5), Point::new(0.5, 0.0)] {
            let exact = p.x.powi(3) - 2.0 * p.x * p.y * p.y + p.y.powi(3);
            assert!((interpolate_cubic(&f, p).unwrap() - exact).abs() < 1e-13);
        }
        assert!(interpolate_cubic(&f, Point::new(1.2, 0.5)).is_none());
    }

    #[test]
    fn residual_of_simple_fields() {
        let g = unit(9);
        let params = Params::with_defaults(&g, 1.5, 2.0, 1.0);
        let zero = residual_field(&ScalarField::zeros(&g), &params).unwrap();
        assert!(zero.values().iter().all(|&r| r == 0.0));
        let c = 0.7f64;
        let res = residual_field(&ScalarField::constant(&g, c), &params).unwrap();
        for node in g.nodes() {
            let r = res.get(node);
            if g.is_boundary(node) {
                assert_eq!(r, 0.0);
            } else {
                assert!((r + 2.0 * c.powf(1.5)).abs() < 1e-14);
            }
        }
        let mut p2 = params.clone();
        p2.lambda = ThieleModulus::Field(ScalarField::constant(&unit(5), 1.0));
        assert!(residual_field(&ScalarField::zeros(&g), &p2).is_err());
    }
}
