//! Nodal scalar fields and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Grid, GridError, NodeIndex, Point};

pub const CSV_HEADER: [&str; 4] = ["x", "y", "value", "is_boundary"];

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("non-finite sample {value} at node ({i}, {j})")]
    NonFiniteSample { i: usize, j: usize, value: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed field CSV: {0}")]
    Format(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One finite real per grid node plus the grid boundary mask.
#[derive(Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    boundary_mask: Vec<bool>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("min", &self.min())
            .field("max", &self.max())
            .finish_non_exhaustive()
    }
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let n = grid.node(k);
            return Err(FieldError::NonFiniteSample {
                i: n.i,
                j: n.j,
                value: values[k],
            });
        }
        let boundary_mask = grid.boundary_mask();
        Ok(ScalarField {
            grid,
            values,
            boundary_mask,
        })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        assert!(value.is_finite(), "constant field value must be finite");
        ScalarField {
            values: vec![value; grid.len()],
            boundary_mask: grid.boundary_mask(),
            grid: grid.clone(),
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, node: NodeIndex) -> f64 {
        self.values[self.grid.index(node)]
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise map; fails if `f` produces a non-finite value.
    pub fn map(&self, mut f: impl FnMut(Point, f64) -> f64) -> Result<Self, FieldError> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.grid.position_of(k), v))
            .collect();
        Self::from_values(self.grid.clone(), values)
    }

    /// Largest absolute nodal difference; `None` if the grids differ.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Option<f64> {
        if self.grid != other.grid {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Write `x,y,value,is_boundary` rows, `j` outer and `i` inner, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FieldError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for (k, &v) in self.values.iter().enumerate() {
            let p = self.grid.position_of(k);
            w.write_record([
                format!("{:.16e}", p.x),
                format!("{:.16e}", p.y),
                format!("{:.16e}", v),
                u8::from(self.boundary_mask[k]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), FieldError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parse the format written by [`ScalarField::write_csv`], recovering the grid
    /// from the node coordinates.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FieldError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().map(str::trim).ne(CSV_HEADER) {
            return Err(FieldError::Format(format!(
                "expected header {:?}, found {:?}",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(FieldError::Format(format!("row {} has {} columns", line + 2, rec.len())));
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| {
                    FieldError::Format(format!("row {}: cannot parse {s:?}: {e}", line + 2))
                })
            };
            rows.push([parse(&rec[0])?, parse(&rec[1])?, parse(&rec[2])?]);
        }
        if rows.len() < 9 {
            return Err(FieldError::Format(format!("only {} rows", rows.len())));
        }
        let y0 = rows[0][1];
        let nx = rows.iter().take_while(|r| r[1] == y0).count();
        if nx < 2 || !rows.len().is_multiple_of(nx) {
            return Err(FieldError::Format("rows do not form a rectangular lattice".into()));
        }
        let ny = rows.len() / nx;
        let origin = Point::new(rows[0][0], y0);
        let h = rows[1][0] - rows[0][0];
        let grid = Grid::new(origin, [h * (nx - 1) as f64, h * (ny - 1) as f64], [nx, ny])?;
        for (k, row) in rows.iter().enumerate() {
            let p = grid.position_of(k);
            if (p.x - row[0]).abs() > 1e-9 * grid.h() || (p.y - row[1]).abs() > 1e-9 * grid.h() {
                return Err(FieldError::Format(format!(
                    "row {} at ({}, {}) is off the lattice",
                    k + 2,
                    row[0],
                    row[1]
                )));
            }
        }
        Self::from_values(grid, rows.into_iter().map(|r| r[2]).collect())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, FieldError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Evaluate `f` at every node; no interpolation is involved.
pub fn sample_function(grid: &Grid, f: impl Fn(Point) -> f64) -> Result<ScalarField, FieldError> {
    let values = (0..grid.len()).map(|k| f(grid.position_of(k))).collect();
    ScalarField::from_values(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_identity_sampling() {
        let g = Grid::unit_square(5).unwrap();
        let z = sample_function(&g, |_| 0.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let fx = sample_function(&g, |p| p.x).unwrap();
        assert_eq!(fx.get(NodeIndex::new(2, 2)), 0.5);
        assert_eq!(fx.boundary_mask().iter().filter(|b| **b).count(), g.boundary_count());
    }

    #[test]
    fn non_finite_sample_is_rejected() {
        let g = Grid::unit_square(5).unwrap();
        let err = sample_function(&g, |p| 1.0 / (p.x - 0.5)).unwrap_err();
        assert!(matches!(err, FieldError::NonFiniteSample { i: 2, .. }));
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let g = Grid::new(Point::new(-1.0, 2.0), [1.0, 0.5], [5, 3]).unwrap();
        let f = sample_function(&g, |p| p.x * p.x + std::f64::consts::PI * p.y).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,value,is_boundary"));
        // first row is node (0,0), second is (1,0): i varies fastest
        assert!(lines.next().unwrap().starts_with("-1.0000000000000000e0,2.0000000000000000e0,"));
        assert!(lines.next().unwrap().starts_with("-7.5000000000000000e-1,"));
        let back = ScalarField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(ScalarField::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "x,y,value,is_boundary\n0,0,1,1\n0.5,0,nan?,1\n";
        assert!(ScalarField::read_csv(bad.as_bytes()).is_err());
    }
}
