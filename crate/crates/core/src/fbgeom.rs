//! Plateau extraction and free-boundary geometry: growth exponent, dyadic
//! flatness, positive density, porosity and box-counting dimension.

use serde::Serialize;
use thiserror::Error;

use crate::field::ScalarField;
use crate::grid::{Grid, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbGeomError {
    #[error("ball centred at ({x}, {y}) with radius {radius} contains too few nodes")]
    EmptyBall { x: f64, y: f64, radius: f64 },
    #[error("need at least {needed} positive samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("every sample is zero; the anchor lies inside the plateau")]
    ZeroSamples,
    #[error("the free boundary is empty")]
    EmptyBoundary,
    #[error("no free-boundary point is far enough from the grid edge for a four-radius fit")]
    NoAnchors,
    #[error("box size {scale} is below 2h = {min}")]
    ScaleUnderResolved { scale: f64, min: f64 },
    #[error("{0}")]
    InvalidParameter(String),
}

/// Nodes at or below `delta` and the plateau nodes touching the positive phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauMask {
    grid: Grid,
    plateau: Vec<bool>,
    free_boundary: Vec<bool>,
    delta: f64,
}

impl PlateauMask {
    /// Build a mask from explicit plateau flags; free-boundary flags are derived.
    pub fn from_plateau(grid: Grid, plateau: Vec<bool>, delta: f64) -> Self {
        assert_eq!(plateau.len(), grid.len(), "one flag per node");
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut free_boundary = vec![false; grid.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if !plateau[k] {
                    continue;
                }
                let open = (i > 0 && !plateau[k - 1])
                    || (i + 1 < nx && !plateau[k + 1])
                    || (j > 0 && !plateau[k - nx])
                    || (j + 1 < ny && !plateau[k + nx]);
                free_boundary[k] = open;
            }
        }
        PlateauMask {
            grid,
            plateau,
            free_boundary,
            delta,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn plateau(&self) -> &[bool] {
        &self.plateau
    }

    pub fn free_boundary(&self) -> &[bool] {
        &self.free_boundary
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn plateau_count(&self) -> usize {
        self.plateau.iter().filter(|p| **p).count()
    }

    pub fn free_boundary_points(&self) -> Vec<Point> {
        (0..self.grid.len())
            .filter(|&k| self.free_boundary[k])
            .map(|k| self.grid.position_of(k))
            .collect()
    }
}

pub fn extract_plateau(field: &ScalarField, delta: f64) -> PlateauMask {
    let plateau = field.values().iter().map(|&v| v <= delta).collect();
    PlateauMask::from_plateau(field.grid().clone(), plateau, delta)
}

/// Radius of the largest open disc about `center` free of positivity nodes,
/// that is the distance to the nearest node above the threshold. Zero when
/// the node nearest `center` is itself positive or the mask has no positive
/// node at all.
pub fn core_radius(mask: &PlateauMask, center: Point) -> f64 {
    let grid = &mask.grid;
    if !mask.plateau[grid.index(grid.nearest_node(center))] {
        return 0.0;
    }
    mask.plateau
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(k, _)| grid.position_of(k).dist(center))
        .min_by(f64::total_cmp)
        .unwrap_or(0.0)
}

fn ball_nodes(grid: &Grid, center: Point, radius: f64, min_nodes: usize) -> Result<Vec<usize>, FbGeomError> {
    let nodes = grid.nodes_in_ball(center, radius);
    if nodes.len() < min_nodes.max(1) {
        return Err(FbGeomError::EmptyBall {
            x: center.x,
            y: center.y,
            radius,
        });
    }
    Ok(nodes)
}

/// Nodal max of `field` over the closed ball `B_r(center)` for each radius.
pub fn sup_over_balls(field: &ScalarField, center: Point, radii: &[f64]) -> Result<Vec<(f64, f64)>, FbGeomError> {
    radii
        .iter()
        .map(|&r| {
            let nodes = ball_nodes(field.grid(), center, r, 1)?;
            let sup = nodes.iter().map(|&k| field.at(k)).fold(f64::NEG_INFINITY, f64::max);
            Ok((r, sup))
        })
        .collect()
}

/// Dyadic radii `r₀ 2^{-k}` with `r₀ = dist(center, edge) / 2`, down to `4h`.
pub fn dyadic_radii(grid: &Grid, center: Point) -> Vec<f64> {
    let r0 = 0.5 * grid.dist_to_edge(center);
    let floor = 4.0 * grid.h() * (1.0 - 1e-9);
    std::iter::successors(Some(r0), |r| Some(r / 2.0))
        .take_while(|&r| r >= floor)
        .collect()
}

/// Least-squares fit of `log sup = log C + alpha log r`, returning `(alpha, C)`.
pub fn fit_growth_exponent(samples: &[(f64, f64)]) -> Result<(f64, f64), FbGeomError> {
    if !samples.is_empty() && samples.iter().all(|s| s.1 <= 0.0) {
        return Err(FbGeomError::ZeroSamples);
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(r, s)| *r > 0.0 && *s > 0.0)
        .map(|(r, s)| (r.ln(), s.ln()))
        .collect();
    let mut radii: Vec<f64> = pts.iter().map(|p| p.0).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if pts.len() < 4 || radii.len() < 2 {
        return Err(FbGeomError::InsufficientData {
            needed: 4,
            got: pts.len(),
        });
    }
    let (slope, intercept) = least_squares(&pts);
    Ok((slope, intercept.exp()))
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slack factor on the dyadic decay bound.
pub const FLATNESS_MARGIN: f64 = 2.0;

/// For `k = 1..=k_max`, whether `sup_{B_{ρ 2^{-k}}} u ≤ 2 · 2^{-kα} sup_{B_ρ} u`
/// with `ρ = dist(center, edge)`. Stops early once the ball radius drops
/// below `h`.
pub fn dyadic_flatness_check(field: &ScalarField, center: Point, gamma: f64, k_max: u32) -> Result<Vec<bool>, FbGeomError> {
    if !(0.0..3.0).contains(&gamma) {
        return Err(FbGeomError::InvalidParameter(format!("gamma = {gamma} outside [0, 3)")));
    }
    let alpha = 4.0 / (3.0 - gamma);
    let grid = field.grid();
    let rho = grid.dist_to_edge(center);
    let (_, norm) = sup_over_balls(field, center, &[rho])?[0];
    let mut flags = Vec::new();
    for k in 1..=k_max {
        let r = rho * 0.5f64.powi(k as i32);
        if r < grid.h() {
            break;
        }
        let (_, sup) = sup_over_balls(field, center, &[r])?[0];
        let bound = FLATNESS_MARGIN * 0.5f64.powf(k as f64 * alpha) * norm.max(0.0);
        flags.push(sup <= bound);
    }
    Ok(flags)
}

/// Area fraction of the positive phase in `B_r(center)`, measured as
/// `#{non-plateau nodes} h² / (π r²)`.
pub fn positive_density(mask: &PlateauMask, center: Point, r: f64) -> Result<f64, FbGeomError> {
    let nodes = ball_nodes(&mask.grid, center, r, 10)?;
    let positive = nodes.iter().filter(|&&k| !mask.plateau[k]).count();
    let h = mask.grid.h();
    Ok(positive as f64 * h * h / (std::f64::consts::PI * r * r))
}

/// Largest ball `B_s(Y) ⊂ B_r(center)` with `Y` a node and no free-boundary
/// node inside, provided `s ≥ 0.05 r`.
pub fn porosity_witness(mask: &PlateauMask, center: Point, r: f64) -> Result<Option<(Point, f64)>, FbGeomError> {
    let grid = &mask.grid;
    let candidates = ball_nodes(grid, center, r, 1)?;
    let boundary: Vec<Point> = grid
        .nodes_in_ball(center, 2.0 * r)
        .into_iter()
        .filter(|&k| mask.free_boundary[k])
        .map(|k| grid.position_of(k))
        .collect();
    let mut best: Option<(Point, f64)> = None;
    for k in candidates {
        if mask.free_boundary[k] {
            continue;
        }
        let y = grid.position_of(k);
        let mut s = r - y.dist(center);
        for b in &boundary {
            s = s.min(y.dist(*b));
        }
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((y, s));
        }
    }
    Ok(best.filter(|(_, s)| *s >= 0.05 * r))
}

/// Box sizes `2h, 4h, …` while at most a quarter of the shorter extent.
pub fn default_box_scales(grid: &Grid) -> Vec<f64> {
    let cap = 0.25 * grid.extent()[0].min(grid.extent()[1]);
    std::iter::successors(Some(2.0 * grid.h()), |s| Some(s * 2.0))
        .take_while(|&s| s <= cap * (1.0 + 1e-12))
        .collect()
}

/// Slope of `log N(ε)` against `log(1/ε)` where `N(ε)` counts the boxes of an
/// `ε`-lattice anchored at the grid origin that contain free-boundary nodes.
pub fn box_dimension(mask: &PlateauMask, scales: &[f64]) -> Result<f64, FbGeomError> {
    let grid = &mask.grid;
    let h = grid.h();
    if let Some(&s) = scales.iter().find(|&&s| s < 2.0 * h * (1.0 - 1e-9)) {
        return Err(FbGeomError::ScaleUnderResolved { scale: s, min: 2.0 * h });
    }
    let (lo, hi) = scales
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if scales.len() < 4 || hi < 4.0 * lo * (1.0 - 1e-9) {
        return Err(FbGeomError::InvalidParameter(
            "need at least 4 box sizes spanning 2 octaves".into(),
        ));
    }
    let nodes: Vec<(f64, f64)> = (0..grid.len())
        .filter(|&k| mask.free_boundary[k])
        .map(|k| {
            let n = grid.node(k);
            (n.i as f64 * h, n.j as f64 * h)
        })
        .collect();
    if nodes.is_empty() {
        return Err(FbGeomError::EmptyBoundary);
    }
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .map(|&eps| {
            let mut boxes: Vec<(i64, i64)> = nodes
                .iter()
                .map(|(x, y)| ((x / eps + 1e-9).floor() as i64, (y / eps + 1e-9).floor() as i64))
                .collect();
            boxes.sort_unstable();
            boxes.dedup();
            ((1.0 / eps).ln(), (boxes.len() as f64).ln())
        })
        .collect();
    Ok(least_squares(&pts).0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PorosityWitness {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeBoundaryReport {
    /// Median of the per-anchor fitted exponents.
    pub alpha_hat: f64,
    pub alpha_expected: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub density_min: f64,
    pub box_dimension: f64,
    pub anchors: Vec<Point>,
    pub scales: Vec<f64>,
    /// Per-anchor exponents, in anchor order.
    pub alpha_per_anchor: Vec<f64>,
    pub porosity_witness: Vec<PorosityWitness>,
}

/// Anchors used by [`analyze_free_boundary`] at most.
pub const MAX_ANCHORS: usize = 16;

/// Free-boundary nodes far enough from the grid edge for a four-radius fit,
/// thinned to at most `MAX_ANCHORS` evenly spaced in row-major order.
pub fn select_anchors(mask: &PlateauMask) -> Vec<Point> {
    let eligible: Vec<Point> = mask
        .free_boundary_points()
        .into_iter()
        .filter(|p| dyadic_radii(&mask.grid, *p).len() >= 4)
        .collect();
    if eligible.len() <= MAX_ANCHORS {
        return eligible;
    }
    (0..MAX_ANCHORS)
        .map(|a| eligible[a * eligible.len() / MAX_ANCHORS])
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Full geometric report for a solved field at plateau threshold `delta`.
pub fn analyze_free_boundary(field: &ScalarField, gamma: f64, delta: f64) -> Result<FreeBoundaryReport, FbGeomError> {
    if !(0.0..3.0).contains(&gamma) {
        return Err(FbGeomError::InvalidParameter(format!("gamma = {gamma} outside [0, 3)")));
    }
    let mask = extract_plateau(field, delta);
    if !mask.free_boundary.iter().any(|b| *b) {
        return Err(FbGeomError::EmptyBoundary);
    }
    let anchors = select_anchors(&mask);
    if anchors.is_empty() {
        return Err(FbGeomError::NoAnchors);
    }
    let h = field.grid().h();
    let mut alphas = Vec::new();
    let mut prefactors = Vec::new();
    let mut density_min = f64::INFINITY;
    let mut witnesses = Vec::new();
    for &a in &anchors {
        let radii = dyadic_radii(field.grid(), a);
        let (alpha, c) = fit_growth_exponent(&sup_over_balls(field, a, &radii)?)?;
        alphas.push(alpha);
        prefactors.push(c);
        for &r in radii.iter().filter(|&&r| r >= 8.0 * h * (1.0 - 1e-9) && r <= 0.25) {
            density_min = density_min.min(positive_density(&mask, a, r)?);
        }
        if let Some((y, s)) = porosity_witness(&mask, a, radii[0])? {
            witnesses.push(PorosityWitness { x: y.x, y: y.y, radius: s });
        }
    }
    let scales = default_box_scales(field.grid());
    let box_dim = box_dimension(&mask, &scales)?;
    Ok(FreeBoundaryReport {
        alpha_hat: median(&mut alphas.clone()),
        alpha_expected: 4.0 / (3.0 - gamma),
        c_hat: median(&mut prefactors),
        density_min: if density_min.is_finite() { density_min.min(1.0) } else { 1.0 },
        box_dimension: box_dim,
        anchors,
        scales,
        alpha_per_anchor: alphas,
        porosity_witness: witnesses,
    })
}
