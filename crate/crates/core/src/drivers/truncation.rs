use super::{Driver, QuadraticDriverSpec};
use crate::error::{Error, Result};

/// Truncation level `n >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TruncationLevel(u32);

impl TruncationLevel {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            Err(Error::config("truncation level must be at least 1"))
        } else {
            Ok(TruncationLevel(n))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// C^1 saturation of the identity: `x` on `[-n, n]`, `+-(n + 1)` beyond `n + 2`,
/// quadratic splices in between.
pub fn truncate_scalar(n: TruncationLevel, x: f64) -> f64 {
    let n = n.0 as f64;
    if x.abs() <= n {
        x
    } else if x > n + 2.0 {
        n + 1.0
    } else if x < -(n + 2.0) {
        -(n + 1.0)
    } else if x > 0.0 {
        (-n * n + 2.0 * n * x - x * (x - 4.0)) / 4.0
    } else {
        (n * n + 2.0 * n * x + x * (x + 4.0)) / 4.0
    }
}

/// Derivative of [`truncate_scalar`].
pub fn truncate_slope(n: TruncationLevel, x: f64) -> f64 {
    let n = n.0 as f64;
    let ax = x.abs();
    if ax <= n {
        1.0
    } else if ax >= n + 2.0 {
        0.0
    } else {
        (n + 2.0 - ax) / 2.0
    }
}

/// `f_n(t, x, y, z) = f(t, x, y, h_n(z))`.
#[derive(Clone, Debug)]
pub struct TruncatedDriver {
    spec: QuadraticDriverSpec,
    level: TruncationLevel,
}

impl TruncatedDriver {
    pub fn level(&self) -> TruncationLevel {
        self.level
    }

    /// Lipschitz constant in `z` on `[t, x, y]`: `|a(t, x, 1)| + |gamma| (n + 1)`.
    pub fn z_lipschitz(&self, t: f64, x: f64) -> f64 {
        self.spec.a(t, x, 1.0).abs() + self.spec.gamma().abs() * (self.level.0 as f64 + 1.0)
    }
}

impl Driver for TruncatedDriver {
    fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
        self.spec.eval(t, x, y, truncate_scalar(self.level, z))
    }
}

pub fn truncated_driver(spec: &QuadraticDriverSpec, n: TruncationLevel) -> TruncatedDriver {
    TruncatedDriver {
        spec: spec.clone(),
        level: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::utility_driver;
    use crate::market::{GeometricParams, MarketModel};
    use proptest::prelude::*;

    fn lvl(n: u32) -> TruncationLevel {
        TruncationLevel::new(n).unwrap()
    }

    #[test]
    fn branch_values() {
        assert_eq!(truncate_scalar(lvl(2), 1.5), 1.5);
        assert_eq!(truncate_scalar(lvl(2), 5.0), 3.0);
        assert_eq!(truncate_scalar(lvl(2), 3.0), 2.75);
        assert_eq!(truncate_scalar(lvl(2), -3.0), -2.75);
        assert_eq!(truncate_scalar(lvl(2), -5.0), -3.0);
        assert!(TruncationLevel::new(0).is_err());
    }

    #[test]
    fn truncated_driver_matches_composition() {
        let spec = utility_driver(&MarketModel::geometric(&GeometricParams::default())).unwrap();
        let f2 = truncated_driver(&spec, lvl(2));
        assert_eq!(f2.eval(0.1, 170.0, 0.0, 5.0).unwrap(), spec.eval(0.1, 170.0, 0.0, 3.0).unwrap());
        for z in [-2.0, -0.7, 0.0, 1.3, 2.0] {
            assert_eq!(f2.eval(0.1, 170.0, 0.0, z).unwrap(), spec.eval(0.1, 170.0, 0.0, z).unwrap());
        }
        // saturation
        let far = f2.eval(0.1, 170.0, 0.0, 1e9).unwrap();
        assert_eq!(far, spec.eval(0.1, 170.0, 0.0, 3.0).unwrap());
        assert!(f2.z_lipschitz(0.0, 170.0) < 1.0);
    }

    proptest! {
        #[test]
        fn bounds_hold(n in 1u32..20, x in -100.0f64..100.0) {
            let l = lvl(n);
            let v = truncate_scalar(l, x);
            prop_assert!(v.abs() <= x.abs().min(n as f64 + 1.0) + 1e-12);
            let s = truncate_slope(l, x);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(truncate_scalar(l, -x), -v);
        }
    }
}
