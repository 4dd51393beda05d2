use std::fmt;
use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finite, Driver};
use crate::error::{Error, Result};
use crate::market::MarketModel;

/// `(t, x, w) -> value`
pub type StateFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Driver of the form `f(t, x, y, z) = l(t, x, y) + a(t, x, z) + (gamma / 2) z^2`
/// with `a` homogeneous of degree one in `z`.
#[derive(Clone)]
pub struct QuadraticDriverSpec {
    l: StateFn,
    a: StateFn,
    gamma: f64,
}

impl fmt::Debug for QuadraticDriverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticDriverSpec").field("gamma", &self.gamma).finish_non_exhaustive()
    }
}

const HOMOGENEITY_SAMPLES: usize = 20;

impl QuadraticDriverSpec {
    /// Builds the spec, checking `a(t, x, c z) = c a(t, x, z)` on 20 random samples.
    pub fn new(l: StateFn, a: StateFn, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::config("quadratic coefficient must be finite"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x686f_6d6f);
        let mut unif = |lo: f64, hi: f64| lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for _ in 0..HOMOGENEITY_SAMPLES {
            let (t, x, z, c) = (unif(0.0, 1.0), unif(0.0, 400.0), unif(-10.0, 10.0), unif(-5.0, 5.0));
            let lhs = a(t, x, c * z);
            let rhs = c * a(t, x, z);
            if !((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs() + rhs.abs())) {
                return Err(Error::config(format!(
                    "linear part is not homogeneous in z: a({t}, {x}, {c}*{z}) = {lhs}, c*a = {rhs}"
                )));
            }
        }
        Ok(QuadraticDriverSpec { l, a, gamma })
    }

    pub fn l(&self, t: f64, x: f64, y: f64) -> f64 {
        (self.l)(t, x, y)
    }

    pub fn a(&self, t: f64, x: f64, z: f64) -> f64 {
        (self.a)(t, x, z)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
        finite(self.l(t, x, y) + self.a(t, x, z) + 0.5 * self.gamma * z * z, "quadratic driver")
    }
}

impl Driver for QuadraticDriverSpec {
    fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
        QuadraticDriverSpec::eval(self, t, x, y, z)
    }
}

pub fn eval_quadratic(spec: &QuadraticDriverSpec, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
    spec.eval(t, x, y, z)
}

/// Exponential-utility driver
/// `f(t, r, z) = theta^2 / (2 eta) - rho theta z - (eta / 2)(1 - rho^2) z^2`.
pub fn utility_driver(model: &MarketModel) -> Result<QuadraticDriverSpec> {
    let eta = model.eta;
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::config("risk aversion eta must be finite and nonzero"));
    }
    let rho = model.rho;
    let m1 = model.clone();
    let m2 = model.clone();
    let l: StateFn = Arc::new(move |t, r, _y| {
        let th = m1.theta(t, r);
        th * th / (2.0 * eta)
    });
    let a: StateFn = Arc::new(move |t, r, z| -rho * m2.theta(t, r) * z);
    QuadraticDriverSpec::new(l, a, -eta * (1.0 - rho * rho))
}
