//! Exponential-utility indifference pricing and hedging on a non-tradable index.
//!
//! Both value processes `Y^F` (holding the claim) and `Y^0` (not holding it) solve the
//! quadratic BSDE with the utility driver; the price is `p_t = Y^F_t - Y^0_t`. The
//! quadratic term is removed by the exponential transform whenever `|rho| < 1`.

use ndarray::Array2;
use rayon::prelude::*;

use crate::drivers::{transformed_driver, utility_driver, value_bound};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::market::{simulate_index, MarketModel};
use crate::parallel::mean_stderr;
use crate::paths::{column, from_time_major, PathBatch};
use crate::payoff::PayoffSpec;
use crate::rng::SeedSpec;
use crate::solver::{solve_lipschitz, BsdeSolution, SolverConfig};

/// Lower bound on `beta^2` used when validating models for pricing.
pub const ELLIPTICITY_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PriceMetadata {
    pub rho: f64,
    pub eta: f64,
    pub strike: Option<f64>,
    pub steps: usize,
    pub paths: usize,
    pub seed: Option<SeedSpec>,
    /// Picard sweeps for the claim and for the zero claim.
    pub iterations: (usize, usize),
    pub converged: bool,
    /// `false` when `|rho| = 1` and the driver was solved without the transform.
    pub transformed: bool,
}

#[derive(Clone, Debug)]
pub struct PriceReport {
    pub grid: TimeGrid,
    /// Pathwise `p_t`, `M x (N+1)`.
    pub price: Array2<f64>,
    pub price_mean: Vec<f64>,
    pub price_stderr: Vec<f64>,
    /// Pathwise optimal strategy, `M x N`.
    pub strategy: Array2<f64>,
    pub strategy_mean: Vec<f64>,
    pub strategy_stderr: Vec<f64>,
    pub p0: f64,
    pub p0_stderr: f64,
    pub metadata: PriceMetadata,
}

impl PriceReport {
    pub fn price_column(&self, i: usize) -> &[f64] {
        column(&self.price, i)
    }

    pub fn strategy_column(&self, i: usize) -> &[f64] {
        column(&self.strategy, i)
    }
}

/// Simulates the index and prices `payoff`.
pub fn price_indifference(
    model: &MarketModel,
    payoff: &PayoffSpec,
    grid: &TimeGrid,
    paths: usize,
    seed: SeedSpec,
    cfg: &SolverConfig,
) -> Result<PriceReport> {
    let lattice = model.default_lattice()?;
    model.validate(&lattice, ELLIPTICITY_EPS)?;
    payoff.validate(&lattice)?;
    let batch = simulate_index(model, grid, paths, seed)?;
    let mut report = price_on_paths(model, payoff, &batch, cfg)?;
    report.metadata.seed = Some(seed);
    Ok(report)
}

/// Prices on an existing index batch.
pub fn price_on_paths(
    model: &MarketModel,
    payoff: &PayoffSpec,
    batch: &PathBatch,
    cfg: &SolverConfig,
) -> Result<PriceReport> {
    let zero = PayoffSpec::zero();
    let (with, without) = rayon::join(
        || utility_solution(model, payoff, batch, cfg),
        || utility_solution(model, &zero, batch, cfg),
    );
    let (with, without) = (with?, without?);

    let grid = *batch.grid();
    let (m, n) = (batch.paths(), grid.steps());
    let price = &with.y - &without.y;
    let (price_mean, price_stderr) = column_stats(&price, n + 1);
    let strategy = optimal_strategy(&with, batch, model)?;
    let (strategy_mean, strategy_stderr) = column_stats(&strategy, n);
    let diff: Vec<f64> = with
        .time_zero_targets
        .iter()
        .zip(&without.time_zero_targets)
        .map(|(a, b)| a - b)
        .collect();
    let (_, p0_stderr) = mean_stderr(&diff);
    let spec = utility_driver(model)?;
    Ok(PriceReport {
        grid,
        price,
        price_mean,
        price_stderr,
        strategy,
        strategy_mean,
        strategy_stderr,
        p0: with.y0 - without.y0,
        p0_stderr,
        metadata: PriceMetadata {
            rho: model.rho,
            eta: model.eta,
            strike: payoff.strike(),
            steps: n,
            paths: m,
            seed: None,
            iterations: (with.iterations, without.iterations),
            converged: with.converged && without.converged,
            transformed: spec.gamma() != 0.0,
        },
    })
}

/// Solution `(Y, Z)` of the utility BSDE with terminal `F(R_T)` in the original
/// variables, through the exponential transform when the driver is quadratic.
pub fn utility_solution(
    model: &MarketModel,
    payoff: &PayoffSpec,
    batch: &PathBatch,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    let spec = utility_driver(model)?;
    let gamma = spec.gamma();
    let terminal = |x: f64| payoff.eval(x);
    if gamma == 0.0 {
        return solve_lipschitz(&spec, &terminal, batch, cfg);
    }
    let lattice = model.default_lattice()?;
    let bound = value_bound(&spec, payoff.cap(), model.horizon, &lattice);
    let driver = transformed_driver(&spec, bound, &lattice)?;
    let exp_terminal = |x: f64| (gamma * payoff.eval(x)).exp();
    let exp_cfg = SolverConfig { basis: cfg.basis.exponential(gamma), ..cfg.clone() };
    let sol = solve_lipschitz(&driver, &exp_terminal, batch, &exp_cfg)?;
    sol.cole_hopf_inverse(gamma, &terminal, batch, &cfg.basis)
}

/// `lambda_t = -(rho / beta) Z_t + theta / (eta beta)` along every path.
pub fn optimal_strategy(solution: &BsdeSolution, index: &PathBatch, model: &MarketModel) -> Result<Array2<f64>> {
    let (m, n) = (index.paths(), index.grid().steps());
    if solution.z.dim() != (m, n) {
        return Err(Error::config("solution and index batch have different shapes"));
    }
    let mut out = Vec::with_capacity(m * n);
    for i in 0..n {
        let t = index.grid().node(i);
        let r = index.state_column(i);
        let z = solution.z_column(i);
        let col: Vec<f64> = (0..m)
            .into_par_iter()
            .with_min_len(1024)
            .map(|k| {
                let beta = model.asset_vol.eval(t, r[k]);
                -model.rho / beta * z[k] + model.theta(t, r[k]) / (model.eta * beta)
            })
            .collect();
        out.extend(col);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "optimal strategy" });
    }
    Ok(from_time_major(m, n, out))
}

/// Monte-Carlo evaluation of `p_0 = (1/gamma) log E[exp(gamma F(R~_T))]`, where `R~`
/// is the geometric index with drift `mu - rho theta sigma`. Returns `(p_0, stderr)`.
pub fn distortion_oracle(model: &MarketModel, payoff: &PayoffSpec, paths: usize, seed: SeedSpec) -> Result<(f64, f64)> {
    let theta = model
        .constant_theta()
        .ok_or_else(|| Error::config("the distortion oracle needs constant asset drift and volatility"))?;
    let (mu, sigma) = model
        .geometric_index()
        .ok_or_else(|| Error::config("the distortion oracle needs a geometric index"))?;
    if paths < 2 {
        return Err(Error::config("the distortion oracle needs at least 2 paths"));
    }
    let gamma = -model.eta * (1.0 - model.rho * model.rho);
    let t = model.horizon;
    let drift = (mu - model.rho * theta * sigma - 0.5 * sigma * sigma) * t;
    let vol = sigma * t.sqrt();
    let values: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|k| {
            let (z, _) = seed.normal_pair(k, 0);
            payoff.eval(model.r0 * (drift + vol * z).exp())
        })
        .collect();
    if gamma == 0.0 {
        return Ok(mean_stderr(&values));
    }
    let w: Vec<f64> = values.iter().map(|f| (gamma * f).exp_m1()).collect();
    let (mean, se) = mean_stderr(&w);
    Ok((mean.ln_1p() / gamma, se / (gamma.abs() * (1.0 + mean))))
}

fn column_stats(a: &Array2<f64>, cols: usize) -> (Vec<f64>, Vec<f64>) {
    (0..cols).map(|i| mean_stderr(column(a, i))).unzip()
}
