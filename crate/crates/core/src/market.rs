//! Two-asset market: a non-tradable index `R` and a tradable asset `S` whose noise
//! `W3 = rho W1 + sqrt(1 - rho^2) W2` is correlated with the index noise `W1`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::{draw_increments, from_time_major, PathBatch};
use crate::rng::SeedSpec;
use crate::validate::Lattice;

pub type CoefficientFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A coefficient `c(t, r)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `c * r`
    Proportional(f64),
    Function(CoefficientFn),
}

impl Coefficient {
    pub fn eval(&self, t: f64, r: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Proportional(c) => c * r,
            Coefficient::Function(f) => f(t, r),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            _ => None,
        }
    }

    pub fn as_proportional(&self) -> Option<f64> {
        match self {
            Coefficient::Proportional(c) => Some(*c),
            _ => None,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Proportional(c) => write!(f, "Proportional({c})"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Stepping {
    /// Exact lognormal step; requires a geometric index.
    #[default]
    Exact,
    Euler,
}

/// Constant-parameter instance: geometric index, constant asset drift and volatility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub r0: f64,
    pub s0: f64,
    pub eta: f64,
    pub horizon: f64,
}

impl Default for GeometricParams {
    /// Reference instance used throughout the examples and tests.
    fn default() -> Self {
        GeometricParams {
            mu: 0.12,
            sigma: 0.41,
            alpha: 0.1,
            beta: 0.35,
            rho: 0.5,
            r0: 170.0,
            s0: 173.0,
            eta: 0.3,
            horizon: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MarketModel {
    pub index_drift: Coefficient,
    pub index_vol: Coefficient,
    pub asset_drift: Coefficient,
    pub asset_vol: Coefficient,
    pub rho: f64,
    pub r0: f64,
    pub s0: f64,
    /// Risk aversion of the exponential utility.
    pub eta: f64,
    pub horizon: f64,
    pub stepping: Stepping,
}

impl MarketModel {
    pub fn geometric(p: &GeometricParams) -> Self {
        MarketModel {
            index_drift: Coefficient::Proportional(p.mu),
            index_vol: Coefficient::Proportional(p.sigma),
            asset_drift: Coefficient::Constant(p.alpha),
            asset_vol: Coefficient::Constant(p.beta),
            rho: p.rho,
            r0: p.r0,
            s0: p.s0,
            eta: p.eta,
            horizon: p.horizon,
            stepping: Stepping::Exact,
        }
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        MarketModel { rho, ..self.clone() }
    }

    pub fn with_spot(&self, r0: f64) -> Self {
        MarketModel { r0, ..self.clone() }
    }

    /// `(mu, sigma)` when the index is geometric.
    pub fn geometric_index(&self) -> Option<(f64, f64)> {
        Some((self.index_drift.as_proportional()?, self.index_vol.as_proportional()?))
    }

    /// Market price of risk `theta = alpha / beta`.
    pub fn theta(&self, t: f64, r: f64) -> f64 {
        self.asset_drift.eval(t, r) / self.asset_vol.eval(t, r)
    }

    /// `theta` when it does not depend on `(t, r)`.
    pub fn constant_theta(&self) -> Option<f64> {
        Some(self.asset_drift.as_constant()? / self.asset_vol.as_constant()?)
    }

    pub fn default_lattice(&self) -> Result<Lattice> {
        Lattice::around(self.horizon, self.r0)
    }

    /// Checks parameters and, on the lattice, ellipticity `beta^2 >= eps` and boundedness of `theta`.
    pub fn validate(&self, lattice: &Lattice, eps: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::config(format!("correlation must lie in [-1, 1], got {}", self.rho)));
        }
        if !(self.r0.is_finite() && self.r0 > 0.0) || !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::config("spot values r0 and s0 must be positive"));
        }
        if self.eta == 0.0 || !self.eta.is_finite() {
            return Err(Error::config("risk aversion eta must be finite and nonzero"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("horizon must be positive"));
        }
        if self.stepping == Stepping::Exact && self.geometric_index().is_none() {
            return Err(Error::config(
                "exact stepping needs a geometric index; use Euler stepping for general coefficients",
            ));
        }
        for (t, r) in lattice.points() {
            let beta = self.asset_vol.eval(t, r);
            if !(beta * beta >= eps) {
                return Err(Error::config(format!(
                    "ellipticity fails: beta({t}, {r})^2 = {} < {eps}",
                    beta * beta
                )));
            }
            let th = self.theta(t, r);
            let coeffs = [th, self.index_drift.eval(t, r), self.index_vol.eval(t, r)];
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::config(format!("coefficients are not finite at ({t}, {r})")));
            }
        }
        Ok(())
    }
}

/// Operation-style alias for [`MarketModel::theta`].
pub fn theta(model: &MarketModel, t: f64, r: f64) -> f64 {
    model.theta(t, r)
}

/// Simulates the index `R` on `grid`; only `dW1` enters the dynamics.
pub fn simulate_index(
    model: &MarketModel,
    grid: &TimeGrid,
    paths: usize,
    seed: SeedSpec,
) -> Result<PathBatch> {
    let increments = draw_increments(grid, paths, seed)?;
    let n = grid.steps();
    let h = grid.mesh();
    let exact = match (model.stepping, model.geometric_index()) {
        (Stepping::Exact, Some(g)) => Some(g),
        (Stepping::Exact, None) => {
            return Err(Error::config("exact stepping needs a geometric index"))
        }
        (Stepping::Euler, _) => None,
    };

    let mut states = vec![0.0f64; paths * (n + 1)];
    states[..paths].fill(model.r0);
    for i in 0..n {
        let t = grid.node(i);
        let (prev, next) = states[i * paths..(i + 2) * paths].split_at_mut(paths);
        let dw = crate::paths::column(&increments.dw1, i);
        match exact {
            Some((mu, sigma)) => {
                let drift = (mu - 0.5 * sigma * sigma) * h;
                next.par_iter_mut()
                    .zip(prev.par_iter())
                    .zip(dw.par_iter())
                    .for_each(|((r1, &r), &w)| *r1 = r * (drift + sigma * w).exp());
            }
            None => {
                next.par_iter_mut()
                    .zip(prev.par_iter())
                    .zip(dw.par_iter())
                    .for_each(|((r1, &r), &w)| {
                        *r1 = r + model.index_drift.eval(t, r) * h + model.index_vol.eval(t, r) * w
                    });
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation { step: i + 1 });
        }
    }
    PathBatch::new(*grid, from_time_major(paths, n + 1, states), increments)
}

/// Simulates the tradable asset `S` on the index batch, driven by
/// `dW3 = rho dW1 + sqrt(1 - rho^2) dW2`. Uses the log-Euler step, exact for constant coefficients.
pub fn simulate_asset(model: &MarketModel, index: &PathBatch) -> Result<PathBatch> {
    let rho = model.rho;
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::config(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    let grid = *index.grid();
    let (m, n, h) = (index.paths(), grid.steps(), grid.mesh());
    let rho_bar = (1.0 - rho * rho).sqrt();

    let mut states = vec![0.0f64; m * (n + 1)];
    states[..m].fill(model.s0);
    for i in 0..n {
        let t = grid.node(i);
        let (prev, next) = states[i * m..(i + 2) * m].split_at_mut(m);
        let r = index.state_column(i);
        let (w1, w2) = (index.dw1_column(i), index.dw2_column(i));
        next.par_iter_mut().enumerate().for_each(|(k, s1)| {
            let a = model.asset_drift.eval(t, r[k]);
            let b = model.asset_vol.eval(t, r[k]);
            let dw3 = if rho == 1.0 {
                w1[k]
            } else {
                rho * w1[k] + rho_bar * w2[k]
            };
            *s1 = prev[k] * ((a - 0.5 * b * b) * h + b * dw3).exp();
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation { step: i + 1 });
        }
    }
    PathBatch::new(grid, from_time_major(m, n + 1, states), index.increments())
}

/// `dW3` increments implied by a batch at correlation `rho`.
pub fn correlated_increments(index: &PathBatch, rho: f64) -> ndarray::Array2<f64> {
    if rho == 1.0 {
        return index.dw1().clone();
    }
    let rho_bar = (1.0 - rho * rho).sqrt();
    let mut out = index.dw1() * rho;
    out.scaled_add(rho_bar, index.dw2());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn base_model() -> MarketModel {
        MarketModel::geometric(&GeometricParams::default())
    }

    #[test]
    fn theta_values() {
        let m = base_model();
        assert!((theta(&m, 0.0, 170.0) - 0.285714).abs() < 1e-6);
        let zero = MarketModel::geometric(&GeometricParams { alpha: 0.0, ..Default::default() });
        assert_eq!(zero.theta(0.3, 150.0), 0.0);
        let m2 = MarketModel::geometric(&GeometricParams { alpha: 0.07, ..Default::default() });
        assert!((m2.theta(0.0, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let m = base_model();
        let l = m.default_lattice().unwrap();
        m.validate(&l, 1e-8).unwrap();
        assert!(m.with_rho(1.5).validate(&l, 1e-8).is_err());
        let degenerate = MarketModel::geometric(&GeometricParams { beta: 0.0, ..Default::default() });
        assert!(degenerate.validate(&l, 1e-8).is_err());
        let mut general = base_model();
        general.index_vol = Coefficient::Function(Arc::new(|_, r| 0.3 * r.sqrt()));
        assert!(general.validate(&l, 1e-8).is_err());
        general.stepping = Stepping::Euler;
        general.validate(&l, 1e-8).unwrap();
    }

    #[test]
    fn one_exact_step_without_noise() {
        // R_1 = 170 exp(0.12 - 0.41^2 / 2)
        let expected = 170.0 * (0.12f64 - 0.41 * 0.41 / 2.0).exp();
        assert!((expected - 176.22).abs() < 5e-3);
        let m = base_model();
        let g = build_grid(1.0, 1).unwrap();
        let b = simulate_index(&m, &g, 64, SeedSpec::new(3, 0)).unwrap();
        for k in 0..64 {
            let w = b.dw1()[[k, 0]];
            let direct = 170.0 * ((0.12 - 0.41f64 * 0.41 / 2.0) + 0.41 * w).exp();
            assert!((b.states()[[k, 1]] - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn degenerate_index_is_constant() {
        for stepping in [Stepping::Exact, Stepping::Euler] {
            let mut m = MarketModel::geometric(&GeometricParams { mu: 0.0, sigma: 0.0, ..Default::default() });
            m.stepping = stepping;
            let g = build_grid(1.0, 10).unwrap();
            let b = simulate_index(&m, &g, 100, SeedSpec::new(1, 0)).unwrap();
            assert!(b.states().iter().all(|&r| r == 170.0));
        }
    }

    #[test]
    fn lognormal_mean() {
        let m = base_model();
        let g = build_grid(1.0, 50).unwrap();
        let n = 70_000;
        let b = simulate_index(&m, &g, n, SeedSpec::new(17, 0)).unwrap();
        let last = b.state_column(50);
        let (mean, se) = crate::parallel::mean_stderr(last);
        let exact = 170.0 * 0.12f64.exp();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn euler_converges_to_exact_in_mean() {
        let mut m = base_model();
        m.stepping = Stepping::Euler;
        let g = build_grid(1.0, 200).unwrap();
        let b = simulate_index(&m, &g, 20_000, SeedSpec::new(2, 0)).unwrap();
        let (mean, se) = crate::parallel::mean_stderr(b.state_column(200));
        assert!((mean - 170.0 * 0.12f64.exp()).abs() < 4.0 * se);
    }

    #[test]
    fn exploding_paths_abort() {
        let mut m = base_model();
        m.stepping = Stepping::Euler;
        m.index_drift = Coefficient::Function(Arc::new(|_, r| r * r * 1e306));
        let g = build_grid(1.0, 5).unwrap();
        let err = simulate_index(&m, &g, 10, SeedSpec::new(1, 0)).unwrap_err();
        assert!(matches!(err, Error::Simulation { step: 1 }), "{err:?}");
    }

    #[test]
    fn asset_uses_correlated_noise() {
        let m = base_model();
        let g = build_grid(1.0, 20).unwrap();
        let idx = simulate_index(&m, &g, 5000, SeedSpec::new(4, 0)).unwrap();
        let s = simulate_asset(&m.with_rho(1.0), &idx).unwrap();
        assert_eq!(s.spot(), 173.0);
        let w3 = correlated_increments(&idx, 1.0);
        assert_eq!(w3, *idx.dw1());
        // with rho = 1 the asset log-increment is an affine function of dW1
        for k in 0..10 {
            let lhs = (s.states()[[k, 1]] / s.states()[[k, 0]]).ln();
            let rhs = (0.1 - 0.35 * 0.35 / 2.0) * g.mesh() + 0.35 * idx.dw1()[[k, 0]];
            assert!((lhs - rhs).abs() < 1e-12);
        }
        assert!(simulate_asset(&m.with_rho(-1.2), &idx).is_err());
    }
}
