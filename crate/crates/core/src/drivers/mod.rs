//! Driver algebra: quadratic drivers, their truncations and the Cole-Hopf transform.

mod quadratic;
mod transform;
mod truncation;

pub use quadratic::{eval_quadratic, utility_driver, QuadraticDriverSpec, StateFn};
pub use transform::{
    cole_hopf_forward, cole_hopf_inverse, transformed_driver, value_bound, CompactSet,
    LipschitzCertificate, LipschitzDriver,
};
pub use truncation::{truncate_scalar, truncate_slope, truncated_driver, TruncatedDriver, TruncationLevel};

use crate::error::{Error, Result};

/// Driver `f(t, x, y, z)` of a backward equation with one-dimensional control.
pub trait Driver: Send + Sync {
    fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64>;

    /// Closed interval the value process is kept in, if the driver is only defined there.
    fn value_domain(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Adapts a closure into a [`Driver`].
pub struct FnDriver<F>(pub F);

impl<F> Driver for FnDriver<F>
where
    F: Fn(f64, f64, f64, f64) -> f64 + Send + Sync,
{
    fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
        finite((self.0)(t, x, y, z), "driver")
    }
}

/// `f = 0`.
pub struct ZeroDriver;

impl Driver for ZeroDriver {
    fn eval(&self, _: f64, _: f64, _: f64, _: f64) -> Result<f64> {
        Ok(0.0)
    }
}

pub(crate) fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what })
    }
}
