//! Uniform time grids and sampled trajectories.

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Uniform grid `t_n = n * dt`, `n = 0..len`, always anchored at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::InvalidStep(dt));
        }
        if len < 2 {
            return Err(GridError::TooShort(len));
        }
        Ok(Self { dt, len })
    }

    /// Grid covering `[0, t_end]` with `round(t_end / dt)` steps.
    pub fn covering(dt: f64, t_end: f64) -> Result<Self, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::InvalidStep(dt));
        }
        let steps = (t_end / dt).round();
        if !(steps.is_finite() && steps >= 1.0) {
            return Err(GridError::TooShort(steps.max(0.0) as usize + 1));
        }
        Self::new(dt, steps as usize + 1)
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |n| self.time(n))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory {
            t0: 0.0,
            dt: self.dt,
            values: self.times().map(f).collect(),
        }
    }

    pub fn zeros(&self) -> Trajectory {
        Trajectory {
            t0: 0.0,
            dt: self.dt,
            values: vec![0.0; self.len],
        }
    }
}

/// Real signal sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::InvalidStep(dt));
        }
        if values.len() < 2 {
            return Err(GridError::TooShort(values.len()));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            dt: self.dt,
            len: self.values.len(),
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |n| self.time(n))
    }

    /// Checks that `other` lives on the same grid (relative step tolerance 1e-12).
    pub fn ensure_same_grid(&self, other: &Trajectory) -> Result<(), GridError> {
        let same_step = (self.dt - other.dt).abs() <= 1e-12 * self.dt.abs().max(other.dt.abs());
        let same_start = (self.t0 - other.t0).abs() <= 1e-12 * self.dt;
        if !same_step || !same_start || self.len() != other.len() {
            return Err(GridError::Mismatch {
                left: (self.t0, self.dt, self.len()),
                right: (other.t0, other.dt, other.len()),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise deviation from `other`. Panics on length mismatch.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.len(), other.len(), "trajectory length mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, factor: f64) -> Trajectory {
        Trajectory {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self += factor * other`, element-wise.
    pub fn add_scaled(&mut self, factor: f64, other: &[f64]) {
        assert_eq!(self.values.len(), other.len(), "trajectory length mismatch");
        for (a, b) in self.values.iter_mut().zip(other) {
            *a += factor * b;
        }
    }
}
