use ndarray::Array2;
use rayon::prelude::*;

use super::regression::Design;
use super::{RegressionBasis, Scheme, SolverConfig};
use crate::drivers::{truncated_driver, Driver, QuadraticDriverSpec, TruncationLevel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::parallel::mean_stderr;
use crate::paths::{column, from_time_major, PathBatch};

/// Regression coefficients of one time step, in terms of the standardized state.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFit {
    pub center: f64,
    pub scale: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BsdeSolution {
    pub grid: TimeGrid,
    /// `M x (N+1)`; the last column is the terminal condition.
    pub y: Array2<f64>,
    /// `M x N`.
    pub z: Array2<f64>,
    pub fits: Vec<StepFit>,
    pub iterations: usize,
    pub converged: bool,
    /// Cross-path mean of `Y_0`.
    pub y0: f64,
    pub y0_stderr: f64,
    /// Pathwise regression targets at time zero; their mean is `y0` when the initial
    /// state is deterministic.
    pub time_zero_targets: Vec<f64>,
    /// `Y_0` after each sweep.
    pub y0_history: Vec<f64>,
}

impl BsdeSolution {
    pub fn y_column(&self, i: usize) -> &[f64] {
        column(&self.y, i)
    }

    pub fn z_column(&self, i: usize) -> &[f64] {
        column(&self.z, i)
    }

    /// Maps a solution of the transformed equation back through `y = log(p)/gamma`.
    /// Terminal values are re-pinned to `terminal(X_T)`; time-zero targets are
    /// linearized around `p_0`.
    ///
    /// `Z` is re-estimated in the original variables by regressing
    /// `(Y_{t_{i+1}} - Y_{t_i}) dW^1_i / h` on `basis`. The pointwise map
    /// `z = q / (gamma p)` divides the regression error of `q` by `p`, which blows up
    /// wherever `p` is small.
    pub fn cole_hopf_inverse(
        &self,
        gamma: f64,
        terminal: &(dyn Fn(f64) -> f64 + Sync),
        paths: &PathBatch,
        basis: &RegressionBasis,
    ) -> Result<BsdeSolution> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(Error::config("the exponential transform needs a finite nonzero quadratic coefficient"));
        }
        let (m, n) = (self.y.nrows(), self.grid.steps());
        let h = self.grid.mesh();
        let mut y = Vec::with_capacity(m * (n + 1));
        for i in 0..=n {
            let p = self.y_column(i);
            if let Some(&bad) = p.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::Domain { value: bad, floor: 0.0 });
            }
            if i == n {
                y.extend(paths.state_column(n).iter().map(|x| terminal(*x)));
            } else {
                y.extend(p.iter().map(|v| v.ln() / gamma));
            }
        }
        let per_step = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = paths.state_column(i);
                let dw = paths.dw1_column(i);
                let design = Design::new(x, basis).map_err(|_| Error::SingularRegression { step: i })?;
                let (cur, next) = (&y[i * m..(i + 1) * m], &y[(i + 1) * m..(i + 2) * m]);
                let target: Vec<f64> = (0..m).map(|k| (next[k] - cur[k]) * dw[k] / h).collect();
                let fz = design.fit(&target, x);
                let fy = design.fit(cur, x);
                let fit = StepFit { center: design.center(), scale: design.scale(), y: fy.coefficients, z: fz.coefficients };
                Ok((fz.fitted, fit))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut z = Vec::with_capacity(m * n);
        let mut fits = Vec::with_capacity(n);
        for (zi, fit) in per_step {
            z.extend(zi);
            fits.push(fit);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "backward solution" });
        }
        let p0 = self.y0;
        if !(p0 > 0.0) {
            return Err(Error::Domain { value: p0, floor: 0.0 });
        }
        let y0 = p0.ln() / gamma;
        let targets: Vec<f64> = self
            .time_zero_targets
            .iter()
            .map(|t| y0 + (t - p0) / (gamma * p0))
            .collect();
        Ok(BsdeSolution {
            grid: self.grid,
            y: from_time_major(m, n + 1, y),
            z: from_time_major(m, n, z),
            fits,
            iterations: self.iterations,
            converged: self.converged,
            y0,
            y0_stderr: self.y0_stderr / (gamma.abs() * p0),
            time_zero_targets: targets,
            y0_history: self.y0_history.iter().map(|p| p.max(f64::MIN_POSITIVE).ln() / gamma).collect(),
        })
    }
}

/// Solves `Y_t = g(X_T) + int f(s, X_s, Y_s, Z_s) ds - int Z_s dW^1_s` on a path batch.
///
/// Picard sweeps use pathwise targets `xi + sum_{j >= i} h f(t_j, X_j, Y^prev_j, Z^prev_j)`;
/// `Y_{t_i}` is their regression on the state. `Z_{t_i}` regresses the one-step
/// quantity `Y_{t_{i+1}} dW^1_i / h` of the same sweep, which by the tower property
/// has the same conditional mean as the pathwise target but far less variance.
pub fn solve_lipschitz(
    driver: &dyn Driver,
    terminal: &(dyn Fn(f64) -> f64 + Sync),
    paths: &PathBatch,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    cfg.validate()?;
    let grid = *paths.grid();
    let (m, n) = (paths.paths(), grid.steps());
    if m < cfg.basis.len() {
        return Err(Error::config(format!(
            "need at least {} paths for a basis of that size, got {m}",
            cfg.basis.len()
        )));
    }
    let xi: Vec<f64> = paths.state_column(n).par_iter().map(|x| terminal(*x)).collect();
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "terminal condition" });
    }
    let designs = (0..n)
        .map(|i| Design::new(paths.state_column(i), &cfg.basis).map_err(|_| Error::SingularRegression { step: i }))
        .collect::<Result<Vec<_>>>()?;
    let ctx = Ctx { driver, paths, designs: &designs, domain: driver.value_domain(), grid };
    match cfg.scheme {
        Scheme::PicardLsmc => picard(&ctx, xi, cfg),
        Scheme::OnePassBackward => one_pass(&ctx, xi),
    }
}

/// Solves the equation with driver `f(t, x, y, h_n(z))`.
pub fn solve_truncated(
    spec: &QuadraticDriverSpec,
    n: TruncationLevel,
    terminal: &(dyn Fn(f64) -> f64 + Sync),
    paths: &PathBatch,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    solve_lipschitz(&truncated_driver(spec, n), terminal, paths, cfg)
}

struct Ctx<'a> {
    driver: &'a dyn Driver,
    paths: &'a PathBatch,
    designs: &'a [Design],
    domain: Option<(f64, f64)>,
    grid: TimeGrid,
}

impl Ctx<'_> {
    fn clamp(&self, v: f64) -> f64 {
        match self.domain {
            Some((lo, hi)) => v.clamp(lo, hi),
            None => v,
        }
    }

    /// `h f(t_i, X_i, y_k, z_k)` per path.
    fn driver_step(&self, i: usize, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let t = self.grid.node(i);
        let h = self.grid.mesh();
        let x = self.paths.state_column(i);
        (0..x.len())
            .into_par_iter()
            .with_min_len(1024)
            .map(|k| self.driver.eval(t, x[k], y[k], z[k]).map(|f| f * h))
            .collect()
    }

    /// Fits `Y_{t_i}` to the pathwise `targets` and `Z_{t_i}` to
    /// `(Y_{t_{i+1}} - (Y_{t_i} - h f_i)) dW^1_i / h`, where `next` holds this sweep's
    /// `Y_{t_{i+1}}` and the subtracted conditional mean acts as a control variate.
    fn fit_step(&self, i: usize, targets: &[f64], next: &[f64], fh: &[f64]) -> (Vec<f64>, Vec<f64>, StepFit) {
        let h = self.grid.mesh();
        let x = self.paths.state_column(i);
        let dw = self.paths.dw1_column(i);
        let design = &self.designs[i];
        let fy = design.fit(targets, x);
        let zt: Vec<f64> = (0..x.len())
            .map(|k| (next[k] - (fy.fitted[k] - fh[k])) * dw[k] / h)
            .collect();
        let fz = design.fit(&zt, x);
        let y: Vec<f64> = fy.fitted.iter().map(|v| self.clamp(*v)).collect();
        let fit = StepFit { center: design.center(), scale: design.scale(), y: fy.coefficients, z: fz.coefficients };
        (y, fz.fitted, fit)
    }

    fn finish(
        &self,
        y: Vec<f64>,
        z: Vec<f64>,
        fits: Vec<StepFit>,
        targets: Vec<f64>,
        iterations: usize,
        converged: bool,
        history: Vec<f64>,
    ) -> Result<BsdeSolution> {
        let (m, n) = (self.paths.paths(), self.grid.steps());
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "backward solution" });
        }
        let (y0, _) = mean_stderr(&y[..m]);
        let (_, y0_stderr) = mean_stderr(&targets);
        Ok(BsdeSolution {
            grid: self.grid,
            y: from_time_major(m, n + 1, y),
            z: from_time_major(m, n, z),
            fits,
            iterations,
            converged,
            y0,
            y0_stderr,
            time_zero_targets: targets,
            y0_history: history,
        })
    }
}

fn picard(ctx: &Ctx<'_>, xi: Vec<f64>, cfg: &SolverConfig) -> Result<BsdeSolution> {
    let (m, n) = (ctx.paths.paths(), ctx.grid.steps());
    let init = ctx.clamp(0.0);
    let mut y = vec![init; m * (n + 1)];
    y[n * m..].copy_from_slice(&xi);
    let mut z = vec![0.0; m * n];
    let mut prev_y0 = init;
    let mut history = Vec::new();
    let mut fits = Vec::new();
    let mut targets = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let mut new_y = vec![0.0; m * (n + 1)];
        new_y[n * m..].copy_from_slice(&xi);
        let mut new_z = vec![0.0; m * n];
        let mut step_fits = Vec::with_capacity(n);
        let mut theta = xi.clone();
        for i in (0..n).rev() {
            let fh = ctx.driver_step(i, &y[i * m..(i + 1) * m], &z[i * m..(i + 1) * m])?;
            theta.iter_mut().zip(&fh).for_each(|(a, b)| *a += b);
            if theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "regression target" });
            }
            let (yi, zi, fit) = ctx.fit_step(i, &theta, &new_y[(i + 1) * m..(i + 2) * m], &fh);
            new_y[i * m..(i + 1) * m].copy_from_slice(&yi);
            new_z[i * m..(i + 1) * m].copy_from_slice(&zi);
            step_fits.push(fit);
        }
        step_fits.reverse();
        y = new_y;
        z = new_z;
        fits = step_fits;
        targets = theta;

        let y0 = mean_stderr(&y[..m]).0;
        history.push(y0);
        let delta = (y0 - prev_y0).abs();
        prev_y0 = y0;
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let iterations = history.len();
    ctx.finish(y, z, fits, targets, iterations, converged, history)
}

fn one_pass(ctx: &Ctx<'_>, xi: Vec<f64>) -> Result<BsdeSolution> {
    let (m, n) = (ctx.paths.paths(), ctx.grid.steps());
    let h = ctx.grid.mesh();
    let mut y = vec![0.0; m * (n + 1)];
    y[n * m..].copy_from_slice(&xi);
    let mut z = vec![0.0; m * n];
    let mut fits = Vec::with_capacity(n);
    let mut targets = Vec::new();
    for i in (0..n).rev() {
        let x = ctx.paths.state_column(i);
        let dw = ctx.paths.dw1_column(i);
        let design = &ctx.designs[i];
        let next = y[(i + 1) * m..(i + 2) * m].to_vec();
        let cond = design.fit(&next, x);
        let zt: Vec<f64> = (0..m).map(|k| (next[k] - cond.fitted[k]) * dw[k] / h).collect();
        let fz = design.fit(&zt, x);
        let fh = ctx.driver_step(i, &next, &fz.fitted)?;
        let target: Vec<f64> = next.iter().zip(&fh).map(|(a, b)| a + b).collect();
        let fy = design.fit(&target, x);
        for (dst, v) in y[i * m..(i + 1) * m].iter_mut().zip(&fy.fitted) {
            *dst = ctx.clamp(*v);
        }
        z[i * m..(i + 1) * m].copy_from_slice(&fz.fitted);
        fits.push(StepFit { center: design.center(), scale: design.scale(), y: fy.coefficients, z: fz.coefficients });
        if i == 0 {
            targets = target;
        }
    }
    fits.reverse();
    let y0 = mean_stderr(&y[..m]).0;
    ctx.finish(y, z, fits, targets, 1, true, vec![y0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::lognormal_put;
    use crate::drivers::{FnDriver, ZeroDriver};
    use crate::grid::build_grid;
    use crate::market::{simulate_index, GeometricParams, MarketModel};
    use crate::payoff::PayoffSpec;
    use crate::rng::SeedSpec;
    use crate::solver::RegressionBasis;

    fn batch(paths: usize, steps: usize) -> PathBatch {
        let model = MarketModel::geometric(&GeometricParams::default());
        simulate_index(&model, &build_grid(1.0, steps).unwrap(), paths, SeedSpec::new(11, 0)).unwrap()
    }

    #[test]
    fn zero_driver_put_matches_lognormal_integral() {
        let paths = batch(20_000, 50);
        let put = PayoffSpec::put(180.0).unwrap();
        let cfg = SolverConfig::new(RegressionBasis::standard(&put));
        let sol = solve_lipschitz(&ZeroDriver, &|x| put.eval(x), &paths, &cfg).unwrap();
        let exact = lognormal_put(170.0, 0.12, 0.41, 1.0, 180.0);
        assert!((sol.y0 - exact).abs() < 3.0 * sol.y0_stderr + 0.002 * exact, "{} vs {exact}", sol.y0);
        assert!(sol.converged && sol.iterations == 2);
        // terminal pinning
        for (y, x) in sol.y_column(50).iter().zip(paths.state_column(50)) {
            assert_eq!(*y, put.eval(*x));
        }
    }

    #[test]
    fn constant_terminal_is_reproduced() {
        let paths = batch(2_000, 10);
        let cfg = SolverConfig::new(RegressionBasis::monomials(0..=3).unwrap());
        let sol = solve_lipschitz(&ZeroDriver, &|_| 2.5, &paths, &cfg).unwrap();
        assert!(sol.y.iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert!(sol.z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn linear_driver_matches_ode() {
        let paths = batch(2_000, 100);
        let cfg = SolverConfig::new(RegressionBasis::monomials(0..=2).unwrap());
        let alpha = 0.3;
        let driver = FnDriver(move |_, _, y: f64, _| alpha * y);
        for scheme in [Scheme::PicardLsmc, Scheme::OnePassBackward] {
            let cfg = SolverConfig { scheme, ..cfg.clone() };
            let sol = solve_lipschitz(&driver, &|_| 3.0, &paths, &cfg).unwrap();
            let exact = 3.0 * alpha.exp();
            assert!((sol.y0 - exact).abs() < 1e-3 * 3.0, "{scheme:?}: {} vs {exact}", sol.y0);
            assert!(sol.converged);
        }
    }

    #[test]
    fn z_of_linear_terminal_is_sigma_r() {
        // g(x) = x, zero driver: Y_t = R_t e^{mu (T-t)}, Z_t = sigma R_t e^{mu (T-t)}
        let paths = batch(20_000, 20);
        let cfg = SolverConfig::new(RegressionBasis::monomials(0..=2).unwrap());
        let sol = solve_lipschitz(&ZeroDriver, &|x| x, &paths, &cfg).unwrap();
        let i = 10;
        let t = paths.grid().node(i);
        let x = paths.state_column(i);
        let z = sol.z_column(i);
        let err: f64 = x
            .iter()
            .zip(z)
            .map(|(r, z)| (z - 0.41 * r * (0.12 * (1.0 - t)).exp()).abs())
            .sum::<f64>()
            / x.len() as f64;
        assert!(err < 1.5, "mean |Z error| = {err}");
    }

    #[test]
    fn picard_stops_on_small_change() {
        let paths = batch(4_000, 20);
        let put = PayoffSpec::put(180.0).unwrap();
        let cfg = SolverConfig::new(RegressionBasis::standard(&put));
        let driver = FnDriver(|_, _, y: f64, z: f64| 0.1 * y - 0.05 * z + 0.01);
        let sol = solve_lipschitz(&driver, &|x| put.eval(x), &paths, &cfg).unwrap();
        assert!(sol.converged);
        let h = &sol.y0_history;
        assert_eq!(h.len(), sol.iterations);
        assert!((h[h.len() - 1] - h[h.len() - 2]).abs() < cfg.tolerance);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let paths = batch(1_000, 10);
        let cfg = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::new(RegressionBasis::monomials(0..=1).unwrap())
        };
        let driver = FnDriver(|_, _, y: f64, _| y);
        let sol = solve_lipschitz(&driver, &|_| 1.0, &paths, &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn errors() {
        let paths = batch(3, 5);
        let cfg = SolverConfig::new(RegressionBasis::monomials(0..=4).unwrap());
        assert!(matches!(solve_lipschitz(&ZeroDriver, &|x| x, &paths, &cfg), Err(Error::Config(_))));
        let paths = batch(100, 5);
        assert!(matches!(
            solve_lipschitz(&ZeroDriver, &|_| f64::NAN, &paths, &cfg),
            Err(Error::NonFinite { .. })
        ));
        let bad = SolverConfig { tolerance: 0.0, ..cfg };
        assert!(matches!(solve_lipschitz(&ZeroDriver, &|x| x, &paths, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn value_domain_clamps_fitted_values() {
        struct Boxed;
        impl Driver for Boxed {
            fn eval(&self, _: f64, _: f64, _: f64, _: f64) -> Result<f64> {
                Ok(0.0)
            }
            fn value_domain(&self) -> Option<(f64, f64)> {
                Some((0.0, 5.0))
            }
        }
        let paths = batch(2_000, 10);
        let cfg = SolverConfig::new(RegressionBasis::monomials(0..=2).unwrap());
        let sol = solve_lipschitz(&Boxed, &|x| (x - 170.0) / 10.0, &paths, &cfg).unwrap();
        for i in 0..10 {
            assert!(sol.y_column(i).iter().all(|v| (0.0..=5.0).contains(v)));
        }
    }
}
