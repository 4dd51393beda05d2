use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validate::Lattice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PayoffKind {
    Put { strike: f64 },
    /// Call capped at the declared bound.
    Call { strike: f64 },
    /// Piecewise-linear through the points, flat outside them.
    Table { points: Vec<(f64, f64)> },
}

/// Terminal payoff `F(x)` with its declared bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    kind: PayoffKind,
    scale: f64,
    cap: f64,
}

impl PayoffSpec {
    /// `(K - x)^+`, bounded by `K`.
    pub fn put(strike: f64) -> Result<Self> {
        positive_strike(strike)?;
        Ok(PayoffSpec {
            kind: PayoffKind::Put { strike },
            scale: 1.0,
            cap: strike,
        })
    }

    /// `min((x - K)^+, cap)`. A call without a cap is unbounded and rejected.
    pub fn call(strike: f64, cap: Option<f64>) -> Result<Self> {
        positive_strike(strike)?;
        let cap = cap.ok_or_else(|| {
            Error::config("call payoff is unbounded; declare a cap to use it as a terminal condition")
        })?;
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::config(format!("payoff cap must be positive, got {cap}")));
        }
        Ok(PayoffSpec {
            kind: PayoffKind::Call { strike },
            scale: 1.0,
            cap,
        })
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("payoff table needs at least one point"));
        }
        if points.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::config("payoff table entries must be finite"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::config("payoff table abscissae must be distinct"));
        }
        let cap = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        Ok(PayoffSpec {
            kind: PayoffKind::Table { points },
            scale: 1.0,
            cap,
        })
    }

    /// `F = 0`.
    pub fn zero() -> Self {
        PayoffSpec::table(vec![(0.0, 0.0)]).expect("valid table")
    }

    /// Multiplies the payoff (and its cap) by `factor`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::config(format!("payoff scale must be positive, got {factor}")));
        }
        self.scale *= factor;
        self.cap *= factor;
        Ok(self)
    }

    /// Overrides the declared bound.
    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap >= 0.0) {
            return Err(Error::config(format!("payoff cap must be finite and nonnegative, got {cap}")));
        }
        self.cap = cap;
        Ok(self)
    }

    pub fn kind(&self) -> &PayoffKind {
        &self.kind
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn strike(&self) -> Option<f64> {
        match self.kind {
            PayoffKind::Put { strike } | PayoffKind::Call { strike } => Some(strike),
            PayoffKind::Table { .. } => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let raw = match &self.kind {
            PayoffKind::Put { strike } => (strike - x).max(0.0),
            PayoffKind::Call { strike } => (x - strike).max(0.0).min(self.cap / self.scale),
            PayoffKind::Table { points } => interpolate(points, x),
        };
        self.scale * raw
    }

    /// Checks `|F| <= cap` on the lattice states (and at zero).
    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        let tol = 1e-12 * self.cap.max(1.0);
        for &x in lattice.states.iter().chain(std::iter::once(&0.0)) {
            let v = self.eval(x);
            if !v.is_finite() || v.abs() > self.cap + tol {
                return Err(Error::config(format!(
                    "payoff value {v} at x = {x} exceeds its declared cap {}",
                    self.cap
                )));
            }
        }
        Ok(())
    }
}

fn positive_strike(strike: f64) -> Result<()> {
    if strike.is_finite() && strike > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("strike must be positive, got {strike}")))
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let j = points.partition_point(|p| p.0 <= x);
    let (x0, v0) = points[j - 1];
    let (x1, v1) = points[j];
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}
