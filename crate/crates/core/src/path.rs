use crate::error::{invalid, Result};

/// A trajectory sampled on a uniform time grid `t0 + k·dt`.
///
/// Used for BESQ paths as well as Brownian, skew Brownian and local-time
/// paths. When `absorbed_at` is set every value from that index on is zero;
/// `absorption_time` then holds the sub-step refinement of the hitting time.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub absorbed_at: Option<usize>,
    pub absorption_time: Option<f64>,
}

impl Path {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        if values.is_empty() {
            return Err(invalid("values", "a path needs at least one value"));
        }
        Ok(Self {
            t0,
            dt,
            values,
            absorbed_at: None,
            absorption_time: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("non-empty path")
    }

    /// Nearest grid index at or before `t`, clamped to the path.
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt + 1e-9).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.steps())
        }
    }

    /// Linear interpolation between grid values, constant outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let u = (t - self.t0) / self.dt;
        if u <= 0.0 {
            return self.values[0];
        }
        let k = u.floor() as usize;
        if k >= self.steps() {
            return self.terminal();
        }
        let w = u - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn same_grid(&self, other: &Path) -> bool {
        self.len() == other.len()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt.max(1.0)
    }

    /// Checks the absorption invariant and, optionally, nonnegativity.
    pub fn check_invariants(&self, nonnegative: bool) -> bool {
        if nonnegative && self.values.iter().any(|v| *v < 0.0 || v.is_nan()) {
            return false;
        }
        match self.absorbed_at {
            Some(k) => k < self.len() && self.values[k..].iter().all(|v| *v == 0.0),
            None => true,
        }
    }
}
