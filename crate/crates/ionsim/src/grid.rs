//! Uniform output grids and validated ground-population traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bound by which a deterministic trace value may leave [0, 1] before it
/// is treated as an integrator failure.
pub const DETERMINISTIC_PG_TOL: f64 = 1e-9;

/// Looser bound for finite-ensemble averages, which carry Monte Carlo
/// rounding on top of integrator error.
pub const ENSEMBLE_PG_TOL: f64 = 1e-6;

/// Uniform time grid with `n_points` samples covering [t0, t1].
///
/// Times are in scaled units (bare Rabi frequency times physical time)
/// unless a caller explicitly works in physical seconds; nothing in this
/// type depends on the choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_points: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t0 >= 0.0 && t1 > t0) {
            return Err(Error::InvalidParameter {
                name: "time range",
                message: format!("need finite 0 <= t0 < t1, got [{t0}, {t1}]"),
            });
        }
        if n_points < 2 {
            return Err(Error::InvalidParameter {
                name: "n_points",
                message: format!("need at least 2 grid points, got {n_points}"),
            });
        }
        Ok(Self { t0, t1, n_points })
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn t1(&self) -> f64 {
        self.t1
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.t1 - self.t0) / (self.n_points - 1) as f64
    }

    pub fn time_at(&self, k: usize) -> f64 {
        debug_assert!(k < self.n_points);
        if k == self.n_points - 1 {
            self.t1
        } else {
            self.t0 + k as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.time_at(k)).collect()
    }
}

/// Ground-state population sampled on a [`TimeGrid`], optionally with a
/// per-point standard error (present for ensemble averages, absent for
/// deterministic evolutions).
///
/// Values are validated to stay in [0, 1] within the tolerance the
/// producer declares; they are stored raw, never clipped.
#[derive(Clone, Debug)]
pub struct PopulationTrace {
    grid: TimeGrid,
    pg: Vec<f64>,
    stderr: Option<Vec<f64>>,
}

impl PopulationTrace {
    pub fn new(grid: TimeGrid, pg: Vec<f64>, stderr: Option<Vec<f64>>, tol: f64) -> Result<Self> {
        if pg.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                got: pg.len(),
            });
        }
        if let Some(se) = &stderr {
            if se.len() != grid.n_points() {
                return Err(Error::DimensionMismatch {
                    expected: grid.n_points(),
                    got: se.len(),
                });
            }
            if let Some(&bad) = se.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidParameter {
                    name: "stderr",
                    message: format!("standard errors must be finite and nonnegative, got {bad}"),
                });
            }
        }
        for (k, &p) in pg.iter().enumerate() {
            if !(p >= -tol && p <= 1.0 + tol) {
                return Err(Error::StateInvariant {
                    which: "population bounds",
                    value: if p < 0.0 { -p } else { p - 1.0 },
                    tolerance: tol,
                    time: grid.time_at(k),
                });
            }
        }
        Ok(Self { grid, pg, stderr })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn pg(&self) -> &[f64] {
        &self.pg
    }

    #[inline]
    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    /// Largest absolute pointwise difference against another trace on the
    /// same grid.
    pub fn max_abs_diff(&self, other: &PopulationTrace) -> Result<f64> {
        if self.grid.n_points() != other.grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.n_points(),
                got: other.grid.n_points(),
            });
        }
        Ok(self
            .pg
            .iter()
            .zip(&other.pg)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
