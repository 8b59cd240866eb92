//! Monotone Gauss–Seidel solver for `Δ∞u = λ (u⁺)^γ` with Dirichlet data.
//!
//! Every sweep replaces each free node by the root of its own min/max stencil
//! equation (see [`crate::operator`]) given the current neighbours. Nodes are
//! visited in four colour classes `(i mod 2, j mod 2)`; no two nodes of one
//! class are king-move neighbours, so a class can be updated in parallel and
//! the result does not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::ScalarField;
use crate::grid::{BallSpec, Grid, GridError, NodeIndex};
use crate::operator::{gather_neighbors, minmax_increments, KING_OFFSETS, KING_WEIGHTS};
use crate::params::{absorption, Params, ParamsError, ThieleModulus};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence after {} sweeps (max update {:e})", .0.report.sweeps, .0.report.final_max_update)]
    NotConverged(Box<Solution>),
    #[error("node ({i}, {j}): residual has the same sign at both ends of [{lo}, {hi}]")]
    BracketFailure { i: usize, j: usize, lo: f64, hi: f64 },
    #[error("boundary datum {value} at node ({i}, {j}) is negative")]
    NegativeData { i: usize, j: usize, value: f64 },
    #[error("{0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Dirichlet problem on a rectangle. Nodes flagged in `fixed` keep the
/// value of `boundary_data`; the rest are unknowns.
#[derive(Clone, Debug)]
pub struct Problem {
    boundary_data: ScalarField,
    fixed: Vec<bool>,
    pub params: Params,
    allow_critical: bool,
}

impl Problem {
    /// Problem with the grid boundary as the Dirichlet set.
    pub fn new(boundary_data: ScalarField, params: Params) -> Result<Self, SolveError> {
        let fixed = boundary_data.boundary_mask().to_vec();
        Self::with_mask(boundary_data, params, fixed)
    }

    /// Problem whose Dirichlet set is every node flagged in `fixed`, which
    /// must contain the grid boundary.
    pub fn with_mask(boundary_data: ScalarField, params: Params, fixed: Vec<bool>) -> Result<Self, SolveError> {
        let grid = boundary_data.grid();
        if fixed.len() != grid.len() {
            return Err(SolveError::InvalidProblem(format!(
                "mask has {} entries for {} nodes",
                fixed.len(),
                grid.len()
            )));
        }
        if grid.boundary_mask().iter().zip(&fixed).any(|(b, f)| *b && !*f) {
            return Err(SolveError::InvalidProblem("mask must contain the grid boundary".into()));
        }
        for (k, _) in fixed.iter().enumerate().filter(|(_, f)| **f) {
            let v = boundary_data.at(k);
            if v < 0.0 {
                let n = grid.node(k);
                return Err(SolveError::NegativeData { i: n.i, j: n.j, value: v });
            }
        }
        params.validate(grid, true)?;
        Ok(Problem {
            boundary_data,
            fixed,
            params,
            allow_critical: false,
        })
    }

    /// Data `c` on every node with `|X - center| >= radius`.
    pub fn ball(grid: &Grid, ball: BallSpec, c: f64, params: Params) -> Result<Self, SolveError> {
        ball.validate(grid)?;
        let fixed = (0..grid.len())
            .map(|k| grid.is_boundary(grid.node(k)) || !ball.contains(grid.position_of(k)))
            .collect();
        Self::with_mask(ScalarField::constant(grid, c), params, fixed)
    }

    /// Admit `gamma = 3`.
    pub fn allow_critical(mut self) -> Self {
        self.allow_critical = true;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.boundary_data.grid()
    }

    pub fn boundary_data(&self) -> &ScalarField {
        &self.boundary_data
    }

    pub fn fixed_mask(&self) -> &[bool] {
        &self.fixed
    }

    pub fn free_count(&self) -> usize {
        self.fixed.iter().filter(|f| !**f).count()
    }

    /// Sup norm of the data over the Dirichlet set.
    pub fn data_sup(&self) -> f64 {
        self.fixed
            .iter()
            .zip(self.boundary_data.values())
            .filter(|(f, _)| **f)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), SolveError> {
        self.params.validate(self.grid(), self.allow_critical)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub sweeps: usize,
    pub final_max_residual: f64,
    pub final_max_update: f64,
    /// Fraction of free nodes with `u <= 100 tol_update`.
    pub plateau_fraction: f64,
    pub converged: bool,
    /// Free nodes outside `[lower - tol_update, upper + tol_update]`; zero
    /// when the bracket was not checked.
    pub bracket_violations: usize,
    pub bracket_checked: bool,
    /// Largest single increase of a nodal value during the sweeps.
    pub max_ascent: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub field: ScalarField,
    pub report: SolveReport,
}

/// Right-hand side `λ (t⁺)^γ` of the node equation.
#[derive(Clone, Copy, Debug)]
struct Source<'a> {
    lambda: &'a ThieleModulus,
    gamma: f64,
}

/// Source value and slope at `t` at node `k`.
#[inline]
fn source_terms(source: Source<'_>, k: usize, t: f64) -> (f64, f64) {
    let l = source.lambda.at(k);
    let gamma = source.gamma;
    if t <= 0.0 || l == 0.0 {
        (0.0, 0.0)
    } else if gamma == 0.0 {
        (l, 0.0)
    } else if gamma == 1.0 {
        (l * t, l)
    } else if gamma == 2.0 {
        (l * t * t, 2.0 * l * t)
    } else if gamma == 3.0 {
        (l * t * t * t, 3.0 * l * t * t)
    } else {
        let p = t.powf(gamma - 1.0);
        (l * p * t, l * gamma * p)
    }
}

/// `P(t) - N(t)` and its slope for the stencil increments.
#[inline(always)]
fn stencil_terms(t: f64, nbrs: &[f64; 8]) -> (f64, f64) {
    let mut p = f64::NEG_INFINITY;
    let mut n = f64::NEG_INFINITY;
    let mut dp = 0.0;
    let mut dn = 0.0;
    for q in 0..8 {
        let d = nbrs[q] - t;
        let sq = KING_WEIGHTS[q] * d * d;
        let up = sq * d;
        let gp = up > p;
        p = if gp { up } else { p };
        dp = if gp { sq } else { dp };
        let gn = -up > n;
        n = if gn { -up } else { n };
        dn = if gn { sq } else { dn };
    }
    (p - n, -3.0 * (dp + dn))
}

struct Bracket {
    lo: f64,
    hi: f64,
}

/// Root of the node equation `P(t) - N(t) = 3h⁴ s(t)`, starting from `start`.
///
/// The residual is decreasing in `t`, positive at the smallest neighbour (or
/// at 0 when the source is active) and nonpositive at the largest one.
/// Safeguarded Newton inside that bracket, falling back on Illinois false
/// position; the endpoint signs are checked when first needed there.
#[inline]
fn update_value(
    start: f64,
    nbrs: &[f64; 8],
    source: Source<'_>,
    k: usize,
    h4x3: f64,
    tol: f64,
) -> Result<f64, Bracket> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in nbrs {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let phi = |t: f64| {
        let (st, dst) = stencil_terms(t, nbrs);
        let (s, ds) = source_terms(source, k, t);
        (st - h4x3 * s, dst - h4x3 * ds)
    };
    let lambda = source.lambda.at(k);
    let mut plateau_possible = false;
    if lo >= 0.0 && lambda > 0.0 {
        lo = 0.0;
        plateau_possible = true;
    }
    if hi <= lo {
        return Ok(hi.max(lo));
    }
    // Φ(0⁺): the source jumps at 0 when gamma = 0
    let at_plateau = || {
        let jump = if source.gamma == 0.0 { lambda } else { 0.0 };
        stencil_terms(0.0, nbrs).0 - h4x3 * jump <= 0.0
    };
    if plateau_possible && start <= 0.0 && at_plateau() {
        return Ok(0.0);
    }
    let (mut a, mut b) = (lo, hi);
    // residuals at a and b; NaN until evaluated
    let (mut fa, mut fb) = (f64::NAN, f64::NAN);
    let mut previous_side = 0;
    let mut t = start.clamp(a, b);
    for _ in 0..200 {
        let (f, df) = phi(t);
        if f == 0.0 {
            return Ok(t);
        }
        let side = if f > 0.0 {
            a = t;
            fa = f;
            1
        } else {
            b = t;
            fb = f;
            -1
        };
        // Illinois: an end kept twice in a row has its residual halved
        if side == previous_side {
            if side > 0 {
                fb *= 0.5;
            } else {
                fa *= 0.5;
            }
        }
        previous_side = side;
        let newton = t - f / df;
        let next = if df < 0.0 && newton > a && newton < b {
            newton
        } else {
            if plateau_possible && a == lo {
                plateau_possible = false;
                if at_plateau() {
                    return Ok(0.0);
                }
            }
            if fa.is_nan() {
                fa = phi(a).0;
                if fa < 0.0 {
                    return Err(Bracket { lo, hi });
                }
            }
            if fb.is_nan() {
                fb = phi(b).0;
                if fb > 0.0 {
                    return Err(Bracket { lo, hi });
                }
            }
            let secant = (a * fb - b * fa) / (fb - fa);
            if secant > a && secant < b {
                secant
            } else {
                0.5 * (a + b)
            }
        };
        if (next - t).abs() <= tol || b - a <= tol {
            if plateau_possible && next <= tol && at_plateau() {
                return Ok(0.0);
            }
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// Distance from the stencil value to the admissible source values at `t`.
#[inline]
fn node_residual(values: &[f64], nx: usize, h: f64, k: usize, source: Source<'_>) -> f64 {
    let nbrs = gather_neighbors(values, nx, k);
    let t = values[k];
    let (p, n, _, _) = minmax_increments(t, &nbrs);
    let lap = (p - n) / (3.0 * h.powi(4));
    let (s, _) = source_terms(source, k, t);
    if t <= 0.0 {
        // at the plateau the source may take any value in [0, λ 0⁺^γ]
        let top = if source.gamma == 0.0 { source.lambda.at(k) } else { 0.0 };
        if lap < 0.0 {
            -lap
        } else {
            (lap - top).max(0.0)
        }
    } else {
        (lap - s).abs()
    }
}

struct RunStats {
    sweeps: usize,
    max_update: f64,
    max_residual: f64,
    converged: bool,
    max_ascent: f64,
}

const RESIDUAL_CHECK_EVERY: usize = 10;

/// History depth of the mixed iteration used by nested solves.
const ANDERSON_DEPTH: usize = 10;

struct Engine<'a> {
    grid: &'a Grid,
    fixed: &'a [bool],
    source: Source<'a>,
    tol_update: f64,
    tol_residual: f64,
    max_sweeps: usize,
    /// Project iterates onto `u >= 0`.
    nonnegative: bool,
    /// Anderson mixing depth; 0 disables mixing.
    mixing: usize,
}

impl Engine<'_> {
    fn max_residual(&self, values: &[f64]) -> f64 {
        let (nx, h) = (self.grid.nx(), self.grid.h());
        (0..values.len())
            .into_par_iter()
            .filter(|&k| !self.fixed[k])
            .map(|k| node_residual(values, nx, h, k, self.source))
            .reduce(|| 0.0, f64::max)
    }

    /// One four-colour sweep. Returns the largest change and the largest
    /// increase of a nodal value.
    fn sweep(
        &self,
        values: &mut [f64],
        scratch: &mut [f64],
        dirty: &mut [bool],
    ) -> Result<(f64, f64), SolveError> {
        let (nx, ny, h) = (self.grid.nx(), self.grid.ny(), self.grid.h());
        let h4x3 = 3.0 * h.powi(4);
        let tol = self.tol_update / 10.0;
        let mut max_change: f64 = 0.0;
        let mut max_ascent: f64 = 0.0;
        for colour in 0..4 {
            let (ci, cj) = (colour % 2, colour / 2);
            let first = if ci == 1 { 1 } else { 2 };
            let failure = {
                let snapshot: &[f64] = values;
                let dirty_ro: &[bool] = dirty;
                scratch
                    .par_chunks_mut(nx)
                    .enumerate()
                    .skip(1)
                    .take(ny - 2)
                    .filter(|(j, _)| j % 2 == cj)
                    .map(|(j, row)| {
                        for i in (first..nx - 1).step_by(2) {
                            let k = j * nx + i;
                            if self.fixed[k] || !dirty_ro[k] {
                                continue;
                            }
                            let old = snapshot[k];
                            let nbrs = gather_neighbors(snapshot, nx, k);
                            match update_value(old, &nbrs, self.source, k, h4x3, tol) {
                                Ok(t) => row[i] = if self.nonnegative { t.max(0.0) } else { t },
                                Err(b) => return Some((i, j, b)),
                            }
                        }
                        None
                    })
                    .find_first(|r| r.is_some())
                    .flatten()
            };
            if let Some((i, j, b)) = failure {
                return Err(SolveError::BracketFailure { i, j, lo: b.lo, hi: b.hi });
            }
            for j in (2 - cj..ny - 1).step_by(2) {
                for i in (first..nx - 1).step_by(2) {
                    let k = j * nx + i;
                    if self.fixed[k] || !dirty[k] {
                        continue;
                    }
                    dirty[k] = false;
                    let new = scratch[k];
                    let change = new - values[k];
                    if change != 0.0 {
                        values[k] = new;
                        max_change = max_change.max(change.abs());
                        max_ascent = max_ascent.max(change);
                        for &(di, dj) in &KING_OFFSETS {
                            let kk = (k as isize + di + dj * nx as isize) as usize;
                            dirty[kk] = !self.fixed[kk];
                        }
                    }
                }
            }
        }
        Ok((max_change, max_ascent))
    }

    fn run(&self, values: &mut [f64]) -> Result<RunStats, SolveError> {
        let mut dirty: Vec<bool> = self.fixed.iter().map(|f| !f).collect();
        let mut scratch = values.to_vec();
        let mut stats = RunStats {
            sweeps: 0,
            max_update: f64::INFINITY,
            max_residual: f64::INFINITY,
            converged: false,
            max_ascent: 0.0,
        };
        let mut mixer = (self.mixing > 0).then(|| Mixer::new(self.mixing, values.len()));
        while stats.sweeps < self.max_sweeps {
            stats.sweeps += 1;
            if let Some(m) = mixer.as_mut() {
                m.before.copy_from_slice(values);
            }
            let (sweep_update, ascent) = self.sweep(values, &mut scratch, &mut dirty)?;
            stats.max_update = sweep_update;
            stats.max_ascent = stats.max_ascent.max(ascent);
            if sweep_update <= self.tol_update {
                stats.converged = true;
                break;
            }
            if stats.sweeps.is_multiple_of(RESIDUAL_CHECK_EVERY) {
                stats.max_residual = self.max_residual(values);
                if stats.max_residual <= self.tol_residual {
                    stats.converged = true;
                    return Ok(stats);
                }
            }
            if let Some(m) = mixer.as_mut() {
                m.mix(values, self.nonnegative);
                for (d, f) in dirty.iter_mut().zip(self.fixed) {
                    *d = !f;
                }
            }
        }
        stats.max_residual = self.max_residual(values);
        Ok(stats)
    }
}

/// Anderson mixing over the last `depth` sweeps: the next iterate is the
/// combination of recent sweep outputs whose sweep residuals `G(x) - x`
/// best cancel in the least-squares sense.
struct Mixer {
    depth: usize,
    before: Vec<f64>,
    last_g: Vec<f64>,
    last_f: Vec<f64>,
    delta_g: Vec<Vec<f64>>,
    delta_f: Vec<Vec<f64>>,
    /// Smallest residual norm since the last restart.
    best: f64,
    since_best: usize,
    started: bool,
}

/// A residual this many times the best one since the last restart clears the history.
const MIXING_RESTART_GROWTH: f64 = 10.0;
/// So does going this many multiples of the depth without a new best.
const MIXING_STALL_DEPTHS: usize = 4;

impl Mixer {
    fn new(depth: usize, len: usize) -> Self {
        Mixer {
            depth,
            before: vec![0.0; len],
            last_g: vec![0.0; len],
            last_f: vec![0.0; len],
            delta_g: Vec::new(),
            delta_f: Vec::new(),
            best: f64::INFINITY,
            since_best: 0,
            started: false,
        }
    }

    fn restart(&mut self) {
        self.delta_g.clear();
        self.delta_f.clear();
        self.best = f64::INFINITY;
        self.since_best = 0;
        self.started = false;
    }

    /// `values` holds `G(x)` for `x = self.before`; overwrite it with the mixed iterate.
    fn mix(&mut self, values: &mut [f64], nonnegative: bool) {
        let f: Vec<f64> = values.iter().zip(&self.before).map(|(g, x)| g - x).collect();
        let norm = dot(&f, &f).sqrt();
        if norm > MIXING_RESTART_GROWTH * self.best
            || self.since_best > MIXING_STALL_DEPTHS * self.depth
        {
            self.restart();
        }
        if norm < self.best {
            self.best = norm;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        if self.started {
            if self.delta_f.len() == self.depth {
                self.delta_f.remove(0);
                self.delta_g.remove(0);
            }
            self.delta_f.push(f.iter().zip(&self.last_f).map(|(a, b)| a - b).collect());
            self.delta_g.push(values.iter().zip(&self.last_g).map(|(a, b)| a - b).collect());
        }
        self.last_f.copy_from_slice(&f);
        self.last_g.copy_from_slice(values);
        self.started = true;
        let m = self.delta_f.len();
        if m == 0 {
            return;
        }
        let mut gram = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for a in 0..m {
            for b in a..m {
                let v = dot(&self.delta_f[a], &self.delta_f[b]);
                gram[a][b] = v;
                gram[b][a] = v;
            }
            rhs[a] = dot(&self.delta_f[a], &f);
        }
        let Some(gamma) = solve_regularised(gram, rhs) else {
            self.restart();
            return;
        };
        for (c, dg) in gamma.iter().zip(&self.delta_g) {
            for (v, d) in values.iter_mut().zip(dg) {
                *v -= c * d;
            }
        }
        if nonnegative {
            for v in values.iter_mut() {
                *v = v.max(0.0);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination on `(A + εI) x = b` with `ε` a small multiple of the trace.
fn solve_regularised(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    let trace: f64 = (0..m).map(|i| a[i][i]).sum();
    if !(trace > 0.0) {
        return None;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1e-12 * trace;
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            for c in col..m {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn run_to_field(
    problem: &Problem,
    source: Source<'_>,
    start: Vec<f64>,
) -> Result<(ScalarField, RunStats), SolveError> {
    run_mixed(problem, source, start, 0)
}

fn run_mixed(
    problem: &Problem,
    source: Source<'_>,
    start: Vec<f64>,
    mixing: usize,
) -> Result<(ScalarField, RunStats), SolveError> {
    let grid = problem.grid();
    let mut values = start;
    for (k, v) in values.iter_mut().enumerate() {
        if problem.fixed[k] {
            *v = problem.boundary_data.at(k);
        }
    }
    let engine = Engine {
        grid,
        fixed: &problem.fixed,
        source,
        tol_update: problem.params.tol_update,
        tol_residual: problem.params.tol_residual,
        max_sweeps: problem.params.max_sweeps,
        nonnegative: source.lambda.max() > 0.0,
        mixing,
    };
    let stats = engine.run(&mut values)?;
    let field = ScalarField::from_values(grid.clone(), values)
        .map_err(|e| SolveError::InvalidProblem(format!("iterate became invalid: {e}")))?;
    Ok((field, stats))
}

fn report_for(problem: &Problem, field: &ScalarField, stats: &RunStats, violations: Option<usize>) -> SolveReport {
    let delta = 100.0 * problem.params.tol_update;
    let free = problem.free_count();
    let flat = (0..field.grid().len())
        .filter(|&k| !problem.fixed[k] && field.at(k) <= delta)
        .count();
    SolveReport {
        sweeps: stats.sweeps,
        final_max_residual: stats.max_residual,
        final_max_update: stats.max_update,
        plateau_fraction: if free == 0 { 0.0 } else { flat as f64 / free as f64 },
        converged: stats.converged,
        bracket_violations: violations.unwrap_or(0),
        bracket_checked: violations.is_some(),
        max_ascent: stats.max_ascent,
    }
}

fn finish(
    problem: &Problem,
    field: ScalarField,
    stats: RunStats,
    violations: Option<usize>,
) -> Result<Solution, SolveError> {
    let report = report_for(problem, &field, &stats, violations);
    let solution = Solution { field, report };
    if solution.report.converged {
        Ok(solution)
    } else {
        Err(SolveError::NotConverged(Box::new(solution)))
    }
}

/// Coarsest level of the nested iteration, in intervals along the shorter axis.
const MIN_COARSE_INTERVALS: usize = 8;

/// Same problem on the grid of every other node, if the node counts allow it.
fn coarsen(problem: &Problem) -> Option<Problem> {
    let grid = problem.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    if (nx - 1) % 2 != 0 || (ny - 1) % 2 != 0 || (nx.min(ny) - 1) / 2 < MIN_COARSE_INTERVALS {
        return None;
    }
    let (cx, cy) = (nx.div_ceil(2), ny.div_ceil(2));
    let coarse = Grid::new(grid.origin(), grid.extent(), [cx, cy]).ok()?;
    let pick = |k: usize| {
        let (i, j) = (k % cx, k / cx);
        2 * j * nx + 2 * i
    };
    let data = ScalarField::from_values(coarse.clone(), (0..coarse.len()).map(|k| problem.boundary_data.at(pick(k))).collect()).ok()?;
    let fixed = (0..coarse.len()).map(|k| problem.fixed[pick(k)]).collect();
    let lambda = match &problem.params.lambda {
        ThieleModulus::Constant(l) => ThieleModulus::Constant(*l),
        ThieleModulus::Field(f) => ThieleModulus::Field(
            ScalarField::from_values(coarse.clone(), (0..coarse.len()).map(|k| f.at(pick(k))).collect()).ok()?,
        ),
    };
    Some(Problem {
        boundary_data: data,
        fixed,
        params: Params {
            lambda,
            max_sweeps: problem.params.max_sweeps.div_ceil(2),
            ..problem.params.clone()
        },
        allow_critical: problem.allow_critical,
    })
}

/// Bilinear interpolation of a coarse-level iterate onto `fine`.
fn prolong(coarse: &ScalarField, fine: &Grid) -> Vec<f64> {
    let cx = coarse.grid().nx();
    let c = coarse.values();
    (0..fine.len())
        .map(|k| {
            let (i, j) = (k % fine.nx(), k / fine.nx());
            let (ci, cj) = (i / 2, j / 2);
            let (ri, rj) = (i % 2, j % 2);
            let at = |di: usize, dj: usize| c[(cj + dj) * cx + ci + di];
            match (ri, rj) {
                (0, 0) => at(0, 0),
                (1, 0) => 0.5 * (at(0, 0) + at(1, 0)),
                (0, 1) => 0.5 * (at(0, 0) + at(0, 1)),
                _ => 0.25 * (at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)),
            }
        })
        .collect()
}

/// Unique fixed point of `problem` by nested iteration: each level starts
/// from the interpolated solution of the next coarser one and runs
/// Anderson-mixed projected Gauss–Seidel. The coarsest level starts from the
/// constant data sup.
fn nested_solve(problem: &Problem) -> Result<(ScalarField, RunStats), SolveError> {
    let source = Source {
        lambda: &problem.params.lambda,
        gamma: problem.params.gamma,
    };
    let grid = problem.grid();
    let start = match coarsen(problem) {
        Some(coarse) => {
            let field = match nested_solve(&coarse) {
                Ok((field, _)) => field,
                Err(SolveError::NotConverged(sol)) => sol.field,
                Err(e) => return Err(e),
            };
            prolong(&field, grid)
        }
        None => vec![problem.data_sup(); grid.len()],
    };
    run_mixed(problem, source, start, ANDERSON_DEPTH)
}

fn harmonic_upper(problem: &Problem) -> Result<ScalarField, SolveError> {
    let harmonic = Problem {
        params: Params {
            lambda: ThieleModulus::Constant(0.0),
            ..problem.params.clone()
        },
        ..problem.clone()
    };
    let (field, stats) = nested_solve(&harmonic)?;
    finish(&harmonic, field, stats, None).map(|s| s.field)
}

/// Perron pair `(lower, upper)`: `upper` is the discrete infinity-harmonic
/// extension of the data, `lower` is the nonnegative solution of
/// `Δ∞u = K χ{u > 0}` with `K = λ_max |φ|∞^γ`, i.e. the zero-order problem with
/// the largest source any solution can see.
pub fn initial_bounds(problem: &Problem) -> Result<(ScalarField, ScalarField), SolveError> {
    problem.validate()?;
    let upper = harmonic_upper(problem)?;
    let lower = lower_from_upper(problem, &upper)?;
    Ok((lower, upper))
}

fn lower_from_upper(problem: &Problem, upper: &ScalarField) -> Result<ScalarField, SolveError> {
    let k = ThieleModulus::Constant(problem.params.lambda_max() * absorption(problem.data_sup(), problem.params.gamma));
    let source = Source { lambda: &k, gamma: 0.0 };
    let (field, stats) = run_to_field(problem, source, upper.values().to_vec())?;
    Ok(finish(problem, field, stats, None)?.field)
}

fn count_violations(problem: &Problem, u: &ScalarField, lower: &ScalarField, upper: &ScalarField) -> usize {
    let tol = problem.params.tol_update;
    (0..u.grid().len())
        .filter(|&k| !problem.fixed[k])
        .filter(|&k| u.at(k) < lower.at(k) - tol || u.at(k) > upper.at(k) + tol)
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Also compute the lower bound and count bracket violations.
    pub bracket_check: bool,
    /// Replace the monotone descent from the upper bound by nested
    /// Anderson-mixed iteration. Same fixed point, much faster on fine grids;
    /// iterates are no longer monotone.
    pub accelerate: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            bracket_check: true,
            accelerate: false,
        }
    }
}

/// Solve from the infinity-harmonic upper bound downward, checking the
/// result against both Perron bounds.
pub fn solve(problem: &Problem) -> Result<Solution, SolveError> {
    solve_with(problem, SolveOptions::default())
}

pub fn solve_with(problem: &Problem, options: SolveOptions) -> Result<Solution, SolveError> {
    problem.validate()?;
    let mut upper = None;
    let (field, stats) = if options.accelerate {
        nested_solve(problem)?
    } else {
        let source = Source {
            lambda: &problem.params.lambda,
            gamma: problem.params.gamma,
        };
        let start = upper.insert(harmonic_upper(problem)?).values().to_vec();
        run_to_field(problem, source, start)?
    };
    let violations = if options.bracket_check {
        let upper = match upper {
            Some(u) => u,
            None => harmonic_upper(problem)?,
        };
        let lower = lower_from_upper(problem, &upper)?;
        Some(count_violations(problem, &field, &lower, &upper))
    } else {
        None
    };
    finish(problem, field, stats, violations)
}

/// Solve starting from an arbitrary iterate; values on Dirichlet nodes are
/// replaced by the data. The bracket check is skipped.
pub fn solve_from(problem: &Problem, start: &ScalarField) -> Result<Solution, SolveError> {
    problem.validate()?;
    if start.grid() != problem.grid() {
        return Err(SolveError::InvalidProblem("initial iterate lives on a different grid".into()));
    }
    let source = Source {
        lambda: &problem.params.lambda,
        gamma: problem.params.gamma,
    };
    let (field, stats) = run_to_field(problem, source, start.values().to_vec())?;
    finish(problem, field, stats, None)
}

/// Discrete infinity-harmonic extension of the values of `boundary_data` on
/// the grid boundary. Data of either sign is accepted.
pub fn solve_infinity_harmonic(grid: &Grid, boundary_data: &ScalarField) -> Result<ScalarField, SolveError> {
    if boundary_data.grid() != grid {
        return Err(SolveError::InvalidProblem("data lives on a different grid".into()));
    }
    let sup = grid
        .nodes()
        .filter(|n| grid.is_boundary(*n))
        .map(|n| boundary_data.get(n).abs())
        .fold(0.0, f64::max);
    let mut params = Params::with_defaults(grid, 1.0, 0.0, sup);
    params.tol_residual = 1e-8 * sup.max(1.0);
    let problem = Problem {
        boundary_data: boundary_data.clone(),
        fixed: grid.boundary_mask(),
        params,
        allow_critical: false,
    };
    let (field, stats) = nested_solve(&problem)?;
    finish(&problem, field, stats, None).map(|s| s.field)
}

/// One scalar node solve against the current neighbours of `field`.
pub fn node_update(field: &ScalarField, node: NodeIndex, params: &Params) -> Result<f64, SolveError> {
    let grid = field.grid();
    params.validate(grid, true)?;
    if node.i >= grid.nx() || node.j >= grid.ny() || grid.is_boundary(node) {
        return Err(SolveError::InvalidProblem(format!("node ({}, {}) is not interior", node.i, node.j)));
    }
    let k = grid.index(node);
    let nbrs = gather_neighbors(field.values(), grid.nx(), k);
    let source = Source {
        lambda: &params.lambda,
        gamma: params.gamma,
    };
    update_value(field.at(k), &nbrs, source, k, 3.0 * grid.h().powi(4), params.tol_update / 10.0).map_err(|b| {
        SolveError::BracketFailure {
            i: node.i,
            j: node.j,
            lo: b.lo,
            hi: b.hi,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample_function;
    use crate::grid::Point;

    fn field_with_neighbors(nbrs: [f64; 8], h: f64) -> (ScalarField, NodeIndex) {
        let g = Grid::new(Point::ORIGIN, [2.0 * h, 2.0 * h], [3, 3]).unwrap();
        let mut v = vec![0.0; 9];
        for (q, &(di, dj)) in KING_OFFSETS.iter().enumerate() {
            v[((1 + dj) * 3 + 1 + di) as usize] = nbrs[q];
        }
        (ScalarField::from_values(g, v).unwrap(), NodeIndex::new(1, 1))
    }

    #[test]
    fn zero_neighbours_give_zero() {
        let (f, node) = field_with_neighbors([0.0; 8], 0.1);
        for gamma in [0.0, 1.0, 2.5] {
            let p = Params::with_defaults(f.grid(), gamma, 3.0, 1.0);
            assert_eq!(node_update(&f, node, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn harmonic_update_is_midrange_for_axis_extremes() {
        let (f, node) = field_with_neighbors([0.9, 0.1, 0.5, 0.4, 0.6, 0.3, 0.5, 0.5], 0.1);
        let p = Params::with_defaults(f.grid(), 1.0, 0.0, 1.0);
        let t = node_update(&f, node, &p).unwrap();
        assert!((t - 0.5).abs() < 1e-11, "{t}");
    }

    #[test]
    fn unit_spacing_root_matches_dense_scan() {
        let (f, node) = field_with_neighbors([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let p = Params::with_defaults(f.grid(), 1.0, 1.0, 1.0);
        let t = node_update(&f, node, &p).unwrap();
        assert!(t > 0.0 && t <= 0.5);
        // independent oracle: (1-t)³ - t³ - 3t changes sign once on [0, 1]
        let g = |t: f64| (1.0 - t).powi(3) - t.powi(3) - 3.0 * t;
        let mut best = (f64::INFINITY, 0.0);
        let steps = 1_000_000;
        for s in 0..=steps {
            let x = 0.5 * s as f64 / steps as f64;
            if g(x).abs() < best.0 {
                best = (g(x).abs(), x);
            }
        }
        assert!((t - best.1).abs() < 1e-6);
        assert!(g(t).abs() < 1e-9);
    }

    #[test]
    fn zero_data_gives_zero_solution_in_one_sweep() {
        let g = Grid::unit_square(17).unwrap();
        let p = Params::with_defaults(&g, 1.0, 1.0, 0.0);
        let sol = solve(&Problem::new(ScalarField::zeros(&g), p).unwrap()).unwrap();
        assert!(sol.field.values().iter().all(|&v| v == 0.0));
        assert_eq!(sol.report.sweeps, 1);
        assert!(sol.report.converged);
        assert_eq!(sol.report.plateau_fraction, 1.0);
    }

    #[test]
    fn constants_are_harmonic() {
        let g = Grid::unit_square(17).unwrap();
        let u = solve_infinity_harmonic(&g, &ScalarField::constant(&g, 0.7)).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn linear_data_reproduced_exactly() {
        let g = Grid::unit_square(17).unwrap();
        let data = sample_function(&g, |p| 0.3 * p.x + 0.8 * p.y - 0.2).unwrap();
        let u = solve_infinity_harmonic(&g, &data).unwrap();
        let err = u.max_abs_diff(&data).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn negative_data_rejected() {
        let g = Grid::unit_square(9).unwrap();
        let p = Params::with_defaults(&g, 1.0, 1.0, 1.0);
        let err = Problem::new(ScalarField::constant(&g, -1.0), p).unwrap_err();
        assert!(matches!(err, SolveError::NegativeData { .. }));
    }

    #[test]
    fn critical_needs_opt_in() {
        let g = Grid::unit_square(9).unwrap();
        let p = Params::with_defaults(&g, 3.0, 1.0, 1.0);
        let prob = Problem::new(ScalarField::constant(&g, 1.0), p).unwrap();
        assert!(matches!(solve(&prob), Err(SolveError::Params(ParamsError::CriticalNotAllowed))));
        assert!(solve(&prob.allow_critical()).is_ok());
    }

    #[test]
    fn not_converged_returns_iterate() {
        let g = Grid::unit_square(33).unwrap();
        let mut p = Params::with_defaults(&g, 1.0, 10.0, 1.0);
        p.max_sweeps = 3;
        let prob = Problem::new(ScalarField::constant(&g, 1.0), p).unwrap();
        match solve(&prob) {
            Err(SolveError::NotConverged(sol)) => {
                assert!(!sol.report.converged);
                assert_eq!(sol.report.sweeps, 3);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
