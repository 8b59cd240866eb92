use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use deadcore::fbgeom::dyadic_radii;
use deadcore::operator::OperatorError;
use deadcore::params::absorption;
use deadcore::problem_file::load_problem;
use deadcore::verify::{config_hash, run_suite, SuiteConfig, VerifyError};
use deadcore::{
    analyze_free_boundary, core_radius, extract_plateau, infinity_laplacian, make_radial, solve_with, sup_over_balls,
    BallSpec, Grid, Params, Point, Problem, ScalarField, Scheme, Solution, SolveError, SolveOptions,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::settings::{Format, Resolved, Vary, DEFAULT_RESOLUTION, DEFAULT_SWEEP_RESOLUTION};
use crate::Failure;

/// Radial profile samples written by `radial`.
const PROFILE_POINTS: usize = 201;

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("cannot write {}: {e}", path.display()))
}

fn write_json(cfg: &Resolved, name: &str, value: &Value) -> Result<(), Failure> {
    let path = cfg.output_path(name)?;
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io_error(&path, e))
}

fn write_csv<S: Serialize>(cfg: &Resolved, name: &str, rows: &[S]) -> Result<(), Failure> {
    let path = cfg.output_path(name)?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_error(&path, e))?;
    }
    w.flush().map_err(|e| io_error(&path, e))
}

/// The resolved settings with the command name, as embedded in every report.
fn config_value(cfg: &Resolved, command: &str) -> Value {
    let mut v = serde_json::to_value(cfg).expect("settings serialize");
    v["command"] = json!(command);
    v
}

fn ball_problem(cfg: &Resolved, gamma: f64, lambda: f64, n: usize) -> Result<Problem, Failure> {
    let grid = Grid::centered_square(Point::ORIGIN, cfg.radius, n).map_err(config_error)?;
    let mut params = Params::with_defaults(&grid, gamma, lambda, cfg.c);
    params.tol_update = cfg.tol_update;
    if let Some(t) = cfg.tol_residual {
        params.tol_residual = t;
    }
    params.scheme = Scheme::from(cfg.scheme);
    let problem = Problem::ball(&grid, BallSpec::new(Point::ORIGIN, cfg.radius), cfg.c, params).map_err(config_error)?;
    Ok(if gamma == 3.0 { problem.allow_critical() } else { problem })
}

fn options(accelerate: bool) -> SolveOptions {
    SolveOptions {
        bracket_check: !accelerate,
        accelerate,
    }
}

/// A solution whether or not the iteration converged.
fn solve_any(problem: &Problem, options: SolveOptions) -> Result<Solution, Failure> {
    match solve_with(problem, options) {
        Ok(sol) => Ok(sol),
        Err(SolveError::NotConverged(sol)) => Ok(*sol),
        Err(e) => Err(config_error(e)),
    }
}

/// Largest `|Δ∞u - λ (u⁺)^γ|` over free nodes under the configured scheme,
/// and the number of nodes the scheme cannot evaluate.
fn scheme_residual(problem: &Problem, field: &ScalarField) -> Result<(f64, usize), Failure> {
    let grid = field.grid();
    let params = &problem.params;
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for k in (0..grid.len()).filter(|&k| !problem.fixed_mask()[k]) {
        match infinity_laplacian(field, grid.node(k), params.scheme) {
            Ok(lap) => {
                let r = lap - params.lambda.at(k) * absorption(field.at(k), params.gamma);
                worst = worst.max(r.abs());
            }
            Err(OperatorError::OutOfHull { .. }) => skipped += 1,
            Err(e) => return Err(config_error(e)),
        }
    }
    Ok((worst, skipped))
}

fn center_value(field: &ScalarField) -> f64 {
    let grid = field.grid();
    field.at(grid.index(grid.nearest_node(Point::ORIGIN)))
}

pub fn solve(cfg: &Resolved) -> Result<(), Failure> {
    let (problem, center) = match &cfg.problem {
        Some(path) => {
            let (spec, problem) = load_problem(path).map_err(config_error)?;
            (problem, spec.center())
        }
        None => (
            ball_problem(cfg, cfg.gamma, cfg.lambda, cfg.resolution.unwrap_or(DEFAULT_RESOLUTION))?,
            Point::ORIGIN,
        ),
    };
    let sol = solve_any(&problem, options(cfg.accelerate))?;
    let mask = extract_plateau(&sol.field, cfg.delta_plateau);
    let (residual, unevaluated) = scheme_residual(&problem, &sol.field)?;
    let config = config_value(cfg, "solve");
    let mut out = json!({
        "config": config,
        "config_hash": config_hash(&config),
        "report": sol.report,
        "detected_core_radius": core_radius(&mask, center),
        "scheme_residual": { "max_abs": residual, "unevaluated_nodes": unevaluated },
        "h": sol.field.grid().h(),
    });
    if cfg.problem.is_none() && cfg.gamma < 3.0 && cfg.lambda > 0.0 {
        let oracle = make_radial(Point::ORIGIN, cfg.radius, cfg.c, cfg.lambda, cfg.gamma).map_err(config_error)?;
        let grid = sol.field.grid();
        let err = (0..grid.len())
            .filter(|&k| !problem.fixed_mask()[k])
            .map(|k| (sol.field.at(k) - oracle.eval(grid.position_of(k))).abs())
            .fold(0.0, f64::max);
        out["oracle"] = json!({
            "max_abs_error": err,
            "max_rel_error": err / cfg.c,
            "r_core": oracle.core_radius,
        });
    }
    if cfg.wants(Format::Csv) {
        let path = cfg.output_path("field.csv")?;
        sol.field.save_csv(&path).map_err(|e| io_error(&path, e))?;
    }
    if cfg.wants(Format::Json) {
        write_json(cfg, "report.json", &out)?;
    }
    if !sol.report.converged {
        return Err(Failure::NotConverged(format!(
            "no convergence after {} sweeps (max update {:e})",
            sol.report.sweeps, sol.report.final_max_update
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ProfileRow {
    r: f64,
    h: f64,
}

pub fn radial(cfg: &Resolved) -> Result<(), Failure> {
    let sol = make_radial(Point::ORIGIN, cfg.radius, cfg.c, cfg.lambda, cfg.gamma).map_err(config_error)?;
    if cfg.wants(Format::Csv) {
        let rows: Vec<ProfileRow> = (0..PROFILE_POINTS)
            .map(|i| {
                let r = cfg.radius * i as f64 / (PROFILE_POINTS - 1) as f64;
                ProfileRow { r, h: sol.eval_at_radius(r) }
            })
            .collect();
        write_csv(cfg, "profile.csv", &rows)?;
    }
    if cfg.wants(Format::Json) {
        let config = config_value(cfg, "radial");
        let out = json!({
            "tau": sol.tau,
            "T": sol.width,
            "r_core": sol.core_radius,
            "has_dead_core": sol.has_dead_core,
            "alpha": sol.alpha(),
            "config": config,
            "config_hash": config_hash(&config),
        });
        write_json(cfg, "radial.json", &out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SupRow {
    anchor: usize,
    x: f64,
    y: f64,
    r: f64,
    sup: f64,
}

pub fn fbanalyze(cfg: &Resolved) -> Result<(), Failure> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Failure::Config("fbanalyze needs --input <field.csv>".into()))?;
    let field = ScalarField::load_csv(input).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
    let report = analyze_free_boundary(&field, cfg.gamma, cfg.delta_plateau).map_err(config_error)?;
    if cfg.wants(Format::Csv) {
        let mut rows = Vec::new();
        for (a, &p) in report.anchors.iter().enumerate() {
            let radii = dyadic_radii(field.grid(), p);
            for (r, sup) in sup_over_balls(&field, p, &radii).map_err(config_error)? {
                rows.push(SupRow { anchor: a, x: p.x, y: p.y, r, sup });
            }
        }
        write_csv(cfg, "sup_over_balls.csv", &rows)?;
    }
    if cfg.wants(Format::Json) {
        let config = config_value(cfg, "fbanalyze");
        let mut out = serde_json::to_value(&report).expect("reports serialize");
        out["config"] = config.clone();
        out["config_hash"] = json!(config_hash(&config));
        write_json(cfg, "free_boundary.json", &out)?;
    }
    Ok(())
}

pub fn verify(cfg: &Resolved) -> Result<(), Failure> {
    let reports = run_suite(cfg.suite.into(), SuiteConfig { resolution: cfg.resolution }).map_err(|e| match e {
        VerifyError::Solve(SolveError::NotConverged(sol)) => Failure::NotConverged(format!(
            "no convergence after {} sweeps (max update {:e})",
            sol.report.sweeps, sol.report.final_max_update
        )),
        other => config_error(other),
    })?;
    let path = cfg.output_path("verify.jsonl")?;
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    let mut w = BufWriter::new(file);
    let stdout = std::io::stdout();
    let mut echo = stdout.lock();
    let mut failed = 0;
    for rep in &reports {
        let line = rep.to_json_line();
        writeln!(w, "{line}").map_err(|e| io_error(&path, e))?;
        let _ = writeln!(echo, "{line}");
        let ok = rep.passed || (cfg.allow_inconclusive && rep.is_inconclusive());
        if !ok {
            failed += 1;
        }
        eprintln!("{} {}", if ok { "PASS" } else { "FAIL" }, rep.name);
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    if failed > 0 {
        return Err(Failure::Experiments(failed));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
struct SweepRow {
    lambda: f64,
    gamma: f64,
    plateau_fraction: f64,
    r_core: f64,
    r_core_exact: f64,
    u_center: f64,
    u_interior_max: f64,
    sweeps: usize,
    converged: bool,
}

fn sweep_point(cfg: &Resolved, lambda: f64, gamma: f64, n: usize) -> Result<SweepRow, Failure> {
    let problem = ball_problem(cfg, gamma, lambda, n)?;
    let sol = solve_any(&problem, options(true))?;
    let mask = extract_plateau(&sol.field, cfg.delta_plateau);
    let free = (0..sol.field.grid().len()).filter(|&k| !problem.fixed_mask()[k]);
    let exact = if gamma < 3.0 && lambda > 0.0 {
        make_radial(Point::ORIGIN, cfg.radius, cfg.c, lambda, gamma).map_err(config_error)?.core_radius
    } else {
        0.0
    };
    Ok(SweepRow {
        lambda,
        gamma,
        plateau_fraction: sol.report.plateau_fraction,
        r_core: core_radius(&mask, Point::ORIGIN),
        r_core_exact: exact,
        u_center: center_value(&sol.field),
        u_interior_max: free.map(|k| sol.field.at(k)).fold(0.0, f64::max),
        sweeps: sol.report.sweeps,
        converged: sol.report.converged,
    })
}

pub fn sweep(cfg: &Resolved) -> Result<(), Failure> {
    let vary = cfg.vary.ok_or_else(|| Failure::Config("sweep needs --vary lambda|gamma".into()))?;
    let (Some(from), Some(to)) = (cfg.from, cfg.to) else {
        return Err(Failure::Config("sweep needs --from and --to".into()));
    };
    let points = cfg.points.unwrap_or(10);
    if points < 2 {
        return Err(Failure::Config(format!("sweep needs at least 2 points, got {points}")));
    }
    if !(from.is_finite() && to.is_finite()) || from == to {
        return Err(Failure::Config("sweep range must be a nonempty finite interval".into()));
    }
    let n = cfg.resolution.unwrap_or(DEFAULT_SWEEP_RESOLUTION);
    let values: Vec<f64> = (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect();
    let mut rows = values
        .par_iter()
        .map(|&v| match vary {
            Vary::Lambda => sweep_point(cfg, v, cfg.gamma, n),
            Vary::Gamma => sweep_point(cfg, cfg.lambda, v, n),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let key = |r: &SweepRow| match vary {
        Vary::Lambda => r.lambda,
        Vary::Gamma => r.gamma,
    };
    rows.sort_by(|a, b| key(a).total_cmp(&key(b)));
    if cfg.wants(Format::Csv) {
        write_csv(cfg, "sweep.csv", &rows)?;
    }
    if cfg.wants(Format::Json) {
        let config = config_value(cfg, "sweep");
        let out = json!({ "config": config, "config_hash": config_hash(&config), "rows": rows });
        write_json(cfg, "sweep.json", &out)?;
    }
    let stalled = rows.iter().filter(|r| !r.converged).count();
    if stalled > 0 {
        return Err(Failure::NotConverged(format!("{stalled} sweep point(s) did not converge")));
    }
    Ok(())
}
