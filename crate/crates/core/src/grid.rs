//! Uniform square-cell lattices on axis-aligned rectangles.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when checking that both axes share one spacing.
const SPACING_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cells are not square: hx = {hx}, hy = {hy}")]
    NonSquareCells { hx: f64, hy: f64 },
    #[error("grid too coarse: {nx} x {ny} nodes (need at least 3 per axis)")]
    TooCoarse { nx: usize, ny: usize },
    #[error("invalid extent ({width}, {height}): extents must be positive and finite")]
    InvalidExtent { width: f64, height: f64 },
    #[error("invalid ball radius {0}")]
    InvalidRadius(f64),
    #[error("ball centred at ({x}, {y}) with radius {radius} contains no grid node")]
    EmptyBall { x: f64, y: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

/// Lattice coordinates of a node: `i` runs along x, `j` along y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIndex {
    pub i: usize,
    pub j: usize,
}

impl NodeIndex {
    pub const fn new(i: usize, j: usize) -> Self {
        NodeIndex { i, j }
    }
}

/// A uniform lattice with square cells covering `[origin, origin + extent]`.
///
/// Node `(i, j)` sits at `origin + (i h, j h)`. Boundary nodes are exactly
/// those on the rectangle edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Point,
    extent: [f64; 2],
    nx: usize,
    ny: usize,
    h: f64,
}

impl Grid {
    /// Build a grid from its rectangle and node counts per axis.
    pub fn new(origin: Point, extent: [f64; 2], resolution: [usize; 2]) -> Result<Grid, GridError> {
        let [width, height] = extent;
        let [nx, ny] = resolution;
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0)
            || !origin.is_finite()
        {
            return Err(GridError::InvalidExtent { width, height });
        }
        if nx < 3 || ny < 3 {
            return Err(GridError::TooCoarse { nx, ny });
        }
        let hx = width / (nx - 1) as f64;
        let hy = height / (ny - 1) as f64;
        if (hx - hy).abs() > SPACING_RTOL * hx.max(hy) {
            return Err(GridError::NonSquareCells { hx, hy });
        }
        Ok(Grid {
            origin,
            extent,
            nx,
            ny,
            h: hx,
        })
    }

    /// `n x n` nodes on the square `[center - half_width, center + half_width]^2`.
    pub fn centered_square(center: Point, half_width: f64, n: usize) -> Result<Grid, GridError> {
        let side = 2.0 * half_width;
        Grid::new(
            center - Point::new(half_width, half_width),
            [side, side],
            [n, n],
        )
    }

    /// `n x n` nodes on the unit square `[0, 1]^2`.
    pub fn unit_square(n: usize) -> Result<Grid, GridError> {
        Grid::new(Point::ORIGIN, [1.0, 1.0], [n, n])
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Node spacing, identical on both axes.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index (`j` outer, `i` inner).
    #[inline]
    pub fn index(&self, node: NodeIndex) -> usize {
        node.j * self.nx + node.i
    }

    #[inline]
    pub fn node(&self, k: usize) -> NodeIndex {
        NodeIndex::new(k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn position(&self, node: NodeIndex) -> Point {
        Point::new(
            self.origin.x + node.i as f64 * self.h,
            self.origin.y + node.j as f64 * self.h,
        )
    }

    #[inline]
    pub fn position_of(&self, k: usize) -> Point {
        self.position(self.node(k))
    }

    #[inline]
    pub fn is_boundary(&self, node: NodeIndex) -> bool {
        node.i == 0 || node.j == 0 || node.i == self.nx - 1 || node.j == self.ny - 1
    }

    pub fn boundary_count(&self) -> usize {
        2 * (self.nx + self.ny) - 4
    }

    /// Flags marking the rectangle-edge nodes, in linear index order.
    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|k| self.is_boundary(self.node(k))).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| NodeIndex::new(i, j)))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (1..self.ny - 1).flat_map(move |j| (1..self.nx - 1).map(move |i| NodeIndex::new(i, j)))
    }

    /// Whether `p` lies in the closed rectangle.
    pub fn contains(&self, p: Point) -> bool {
        let slack = 1e-12 * self.h;
        p.x >= self.origin.x - slack
            && p.y >= self.origin.y - slack
            && p.x <= self.origin.x + self.extent[0] + slack
            && p.y <= self.origin.y + self.extent[1] + slack
    }

    /// Euclidean distance from `p` to the rectangle edge (0 outside).
    pub fn dist_to_edge(&self, p: Point) -> f64 {
        let dx = (p.x - self.origin.x).min(self.origin.x + self.extent[0] - p.x);
        let dy = (p.y - self.origin.y).min(self.origin.y + self.extent[1] - p.y);
        dx.min(dy).max(0.0)
    }

    /// Linear indices of nodes with `|node - center| <= radius`, in row-major order.
    pub fn nodes_in_ball(&self, center: Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !(radius >= 0.0) {
            return out;
        }
        let lo = |c: f64, o: f64| (((c - radius - o) / self.h).ceil().max(0.0)) as usize;
        let hi = |c: f64, o: f64, n: usize| {
            let v = ((c + radius - o) / self.h).floor();
            if v < 0.0 {
                None
            } else {
                Some((v as usize).min(n - 1))
            }
        };
        let (Some(i1), Some(j1)) = (
            hi(center.x, self.origin.x, self.nx),
            hi(center.y, self.origin.y, self.ny),
        ) else {
            return out;
        };
        let i0 = lo(center.x, self.origin.x);
        let j0 = lo(center.y, self.origin.y);
        let r2 = radius * radius * (1.0 + 1e-14);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let p = self.position(NodeIndex::new(i, j));
                let d = p - center;
                if d.x * d.x + d.y * d.y <= r2 {
                    out.push(j * self.nx + i);
                }
            }
        }
        out
    }

    /// Lattice node nearest to `p`, clamped into the grid.
    pub fn nearest_node(&self, p: Point) -> NodeIndex {
        let fi = ((p.x - self.origin.x) / self.h).round();
        let fj = ((p.y - self.origin.y) / self.h).round();
        let i = fi.clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = fj.clamp(0.0, (self.ny - 1) as f64) as usize;
        NodeIndex::new(i, j)
    }
}

/// Construct a [`Grid`]; see [`Grid::new`].
pub fn make_grid(origin: Point, extent: [f64; 2], resolution: [usize; 2]) -> Result<Grid, GridError> {
    Grid::new(origin, extent, resolution)
}

/// A closed ball `B_r(center)` used for ball-shaped problems and sup queries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Point,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Point, radius: f64) -> Self {
        BallSpec { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.dist(self.center) <= self.radius
    }

    /// Check `radius > 0` and that at least one node lies inside.
    pub fn validate(&self, grid: &Grid) -> Result<(), GridError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(GridError::InvalidRadius(self.radius));
        }
        if grid.nodes_in_ball(self.center, self.radius).is_empty() {
            return Err(GridError::EmptyBall {
                x: self.center.x,
                y: self.center.y,
                radius: self.radius,
            });
        }
        Ok(())
    }
}
