//! Flag and config-file settings. A flag beats the config file, which beats
//! the built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use deadcore::params::DEFAULT_TOL_UPDATE;
use deadcore::Scheme;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Vary {
    Lambda,
    Gamma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SuiteName {
    Comparison,
    Liouville,
    Critical,
    Scaling,
    Full,
}

impl From<SuiteName> for deadcore::verify::Suite {
    fn from(s: SuiteName) -> Self {
        use deadcore::verify::Suite;
        match s {
            SuiteName::Comparison => Suite::Comparison,
            SuiteName::Liouville => Suite::Liouville,
            SuiteName::Critical => Suite::Critical,
            SuiteName::Scaling => Suite::Scaling,
            SuiteName::Full => Suite::Full,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Minmax,
    Interp,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Minmax => Scheme::MinMaxStencil,
            SchemeName::Interp => Scheme::DirectionInterp,
        }
    }
}

/// Every setting, each optional so that flags and the config file can be layered.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// JSON file with any of these settings, keyed by flag name with `_` for `-`.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Absorption exponent in [0, 3]; 3 is the critical case.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Thiele modulus.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Boundary level on the outer circle.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Outer radius of the ball.
    #[arg(long = "R", global = true)]
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    /// Grid nodes per side; for `verify`, overrides every experiment's own size.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Scheme for the reported residual. The solver always iterates the min/max scheme.
    #[arg(long, global = true)]
    pub scheme: Option<SchemeName>,
    #[arg(long, global = true)]
    pub tol_update: Option<f64>,
    #[arg(long, global = true)]
    pub tol_residual: Option<f64>,
    /// Plateau threshold; defaults to 100 × tol-update.
    #[arg(long, global = true)]
    pub delta_plateau: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    #[arg(long, global = true)]
    pub suite: Option<SuiteName>,
    /// Count inconclusive experiments as passed.
    #[arg(long, global = true)]
    #[serde(default)]
    pub allow_inconclusive: bool,
    #[arg(long, global = true)]
    pub vary: Option<Vary>,
    #[arg(long, global = true)]
    pub from: Option<f64>,
    #[arg(long, global = true)]
    pub to: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Problem specification JSON solved by `solve` in place of the ball
    /// given by gamma, lambda, c, R and resolution.
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,
    /// Field CSV read by `fbanalyze`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Solve by accelerated nested iteration without the bracket check.
    #[arg(long, global = true)]
    #[serde(default)]
    pub accelerate: bool,
}

macro_rules! layer {
    ($flags:ident, $file:ident; $($field:ident),*) => {
        Settings {
            config: $flags.config,
            allow_inconclusive: $flags.allow_inconclusive || $file.allow_inconclusive,
            accelerate: $flags.accelerate || $file.accelerate,
            $($field: $flags.$field.or($file.$field),)*
        }
    };
}

impl Settings {
    /// Flags layered over the config file named by `--config`, if any.
    pub fn resolve(self) -> Result<Resolved, Failure> {
        let file = match &self.config {
            Some(path) => read_config(path)?,
            None => Settings::default(),
        };
        let flags = self;
        let merged = layer!(flags, file; gamma, lambda, c, radius, resolution, scheme, tol_update,
            tol_residual, delta_plateau, output, format, suite, vary, from, to, points, problem, input);
        Resolved::new(merged)
    }
}

fn read_config(path: &Path) -> Result<Settings, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("bad config {}: {e}", path.display())))
}

/// Settings with defaults filled in.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub gamma: f64,
    pub lambda: f64,
    pub c: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub resolution: Option<usize>,
    pub scheme: SchemeName,
    pub tol_update: f64,
    pub tol_residual: Option<f64>,
    pub delta_plateau: f64,
    #[serde(skip)]
    pub output: PathBuf,
    pub format: Vec<Format>,
    pub suite: SuiteName,
    pub allow_inconclusive: bool,
    pub vary: Option<Vary>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub problem: Option<PathBuf>,
    #[serde(skip)]
    pub input: Option<PathBuf>,
    pub accelerate: bool,
}

pub const DEFAULT_RESOLUTION: usize = 129;
pub const DEFAULT_SWEEP_RESOLUTION: usize = 65;

impl Resolved {
    fn new(s: Settings) -> Result<Self, Failure> {
        let tol_update = s.tol_update.unwrap_or(DEFAULT_TOL_UPDATE);
        let mut format = s.format.unwrap_or_else(|| vec![Format::Csv, Format::Json]);
        format.sort();
        format.dedup();
        let r = Resolved {
            gamma: s.gamma.unwrap_or(1.0),
            lambda: s.lambda.unwrap_or(1.0),
            c: s.c.unwrap_or(1.0),
            radius: s.radius.unwrap_or(1.0),
            resolution: s.resolution,
            scheme: s.scheme.unwrap_or(SchemeName::Minmax),
            tol_update,
            tol_residual: s.tol_residual,
            delta_plateau: s.delta_plateau.unwrap_or(100.0 * tol_update),
            output: s.output.unwrap_or_else(|| PathBuf::from(".")),
            format,
            suite: s.suite.unwrap_or(SuiteName::Full),
            allow_inconclusive: s.allow_inconclusive,
            vary: s.vary,
            from: s.from,
            to: s.to,
            points: s.points,
            problem: s.problem,
            input: s.input,
            accelerate: s.accelerate,
        };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<(), Failure> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Failure::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if !(0.0..=3.0).contains(&self.gamma) {
            return Err(Failure::Config(format!("gamma must lie in [0, 3], got {}", self.gamma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Failure::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        positive("c", self.c)?;
        positive("R", self.radius)?;
        positive("tol-update", self.tol_update)?;
        positive("delta-plateau", self.delta_plateau)?;
        if let Some(t) = self.tol_residual {
            positive("tol-residual", t)?;
        }
        if let Some(n) = self.resolution {
            if n < 3 {
                return Err(Failure::Config(format!("resolution must be at least 3, got {n}")));
            }
        }
        if self.format.is_empty() {
            return Err(Failure::Config("at least one output format is required".into()));
        }
        Ok(())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.format.contains(&f)
    }

    pub fn output_path(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.output)
            .map_err(|e| Failure::Config(format!("cannot create {}: {e}", self.output.display())))?;
        Ok(self.output.join(name))
    }
}
