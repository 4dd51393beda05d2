use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equidistant partition of `[0, T]` with `N + 1` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::config("number of time steps must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Mesh `h = T / N`.
    pub fn mesh(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `t_i = i T / N`, computed directly rather than by accumulation.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.steps);
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }

    /// Number of fine steps per coarse step if `self` refines `coarse`.
    pub fn refinement_of(&self, coarse: &TimeGrid) -> Option<usize> {
        let same_horizon = (self.horizon - coarse.horizon).abs() <= 1e-12 * self.horizon;
        if same_horizon && self.steps % coarse.steps == 0 {
            Some(self.steps / coarse.steps)
        } else {
            None
        }
    }
}

/// Operation-style constructor.
pub fn build_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}
