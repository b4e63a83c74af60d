use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::switching::Regime;

/// Strictly increasing, nonnegative observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("grid times must be finite and nonnegative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid times must be strictly increasing"));
        }
        Ok(TimeGrid(times))
    }

    /// `points` equally spaced times from 0 to `t_end` inclusive.
    pub fn uniform(t_end: f64, points: usize) -> Result<Self> {
        if points < 2 || !(t_end > 0.0) {
            return Err(Error::invalid(format!(
                "uniform grid needs t_end > 0 and at least 2 points, got {t_end}, {points}"
            )));
        }
        let step = t_end / (points - 1) as f64;
        let mut times: Vec<f64> = (0..points).map(|i| i as f64 * step).collect();
        times[points - 1] = t_end;
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.0.last().expect("grid is nonempty")
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        TimeGrid::new(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.0
    }
}

/// One realized path recorded on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Regime governing the path on the interval ending at each grid time;
    /// `None` for deterministic paths.
    pub regimes: Option<Vec<Regime>>,
}

impl TrajectorySample {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is nonempty")
    }

    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.states.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                found: self.states.len(),
            });
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("trajectory times must be strictly increasing"));
        }
        let n = self.dim();
        if self.states.iter().any(|s| s.len() != n) {
            return Err(Error::invalid("trajectory states have inconsistent dimension"));
        }
        if self.states.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("trajectory state"));
        }
        if let Some(r) = &self.regimes {
            if r.len() != self.times.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.times.len(),
                    found: r.len(),
                });
            }
        }
        Ok(())
    }

    /// Sup over grid points of the Euclidean distance to `other`.
    pub fn sup_distance(&self, other: &TrajectorySample) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::invalid("trajectories are recorded on different grids"));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV with header `time,regime,x_0,...,x_{n-1}`. The regime column is
    /// empty for deterministic paths.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.dim();
        let mut header = vec!["time".to_string(), "regime".to_string()];
        header.extend((0..n).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let mut rec = Vec::with_capacity(n + 2);
            rec.push(t.to_string());
            rec.push(
                self.regimes
                    .as_ref()
                    .map(|r| r[k].index().to_string())
                    .unwrap_or_default(),
            );
            rec.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes a row-major `rows × cols` field as a headerless CSV grid.
pub fn write_grid_csv<W: Write>(values: &[f64], rows: usize, cols: usize, out: W) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            found: values.len(),
        });
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in 0..rows {
        w.write_record(values[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
