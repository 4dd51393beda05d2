//! Error of truncated-driver solutions against the exponential-transform solution.
//!
//! Only decrease and saturation of the errors are checked: the theoretical decay in
//! `n` is far faster than anything resolvable above the Monte-Carlo noise floor.

use serde::Serialize;

use crate::drivers::{utility_driver, TruncationLevel};
use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::parallel::mean_stderr;
use crate::paths::PathBatch;
use crate::payoff::PayoffSpec;
use crate::pricing::utility_solution;
use crate::solver::{solve_truncated, BsdeSolution, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationRow {
    pub level: u32,
    /// `E[sup_t |Y^n_t - Y_t|]`
    pub y_error: f64,
    pub y_error_se: f64,
    /// `E[sum_i h |Z^n_{t_i} - Z_{t_i}|^2]`
    pub z_error: f64,
    pub z_error_se: f64,
    pub y0: f64,
    pub y0_stderr: f64,
    pub max_abs_z: f64,
    pub iterations: usize,
    /// Error no larger than the previous level's plus two combined standard errors.
    pub monotone: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationReport {
    /// `"cole-hopf"`, or `"direct"` when the driver has no quadratic term.
    pub reference_method: &'static str,
    pub reference_y0: f64,
    pub reference_y0_stderr: f64,
    pub reference_max_abs_z: f64,
    pub rows: Vec<TruncationRow>,
}

impl TruncationReport {
    pub fn monotone(&self) -> bool {
        self.rows.iter().all(|r| r.monotone)
    }
}

/// Solves the truncated utility BSDE at each level on `paths` and compares with the
/// reference solution on the same paths.
pub fn truncation_study(
    model: &MarketModel,
    payoff: &PayoffSpec,
    levels: &[u32],
    paths: &PathBatch,
    cfg: &SolverConfig,
) -> Result<TruncationReport> {
    if levels.is_empty() {
        return Err(Error::config("truncation study needs at least one level"));
    }
    let levels = levels.iter().map(|n| TruncationLevel::new(*n)).collect::<Result<Vec<_>>>()?;
    let spec = utility_driver(model)?;
    let reference = utility_solution(model, payoff, paths, cfg)?;
    let terminal = |x: f64| payoff.eval(x);

    let mut rows: Vec<TruncationRow> = Vec::with_capacity(levels.len());
    for n in levels {
        let sol = solve_truncated(&spec, n, &terminal, paths, cfg)?;
        let (ye, ze) = errors(&sol, &reference);
        let (y_error, y_error_se) = mean_stderr(&ye);
        let (z_error, z_error_se) = mean_stderr(&ze);
        let monotone = match rows.last() {
            None => true,
            Some(p) => {
                let ok_y = y_error <= p.y_error + 2.0 * (y_error_se.powi(2) + p.y_error_se.powi(2)).sqrt();
                let ok_z = z_error <= p.z_error + 2.0 * (z_error_se.powi(2) + p.z_error_se.powi(2)).sqrt();
                ok_y && ok_z
            }
        };
        rows.push(TruncationRow {
            level: n.get(),
            y_error,
            y_error_se,
            z_error,
            z_error_se,
            y0: sol.y0,
            y0_stderr: sol.y0_stderr,
            max_abs_z: max_abs(&sol),
            iterations: sol.iterations,
            monotone,
        });
    }
    Ok(TruncationReport {
        reference_method: if spec.gamma() == 0.0 { "direct" } else { "cole-hopf" },
        reference_y0: reference.y0,
        reference_y0_stderr: reference.y0_stderr,
        reference_max_abs_z: max_abs(&reference),
        rows,
    })
}

fn max_abs(sol: &BsdeSolution) -> f64 {
    sol.z.iter().fold(0.0, |a, z| a.max(z.abs()))
}

fn errors(a: &BsdeSolution, b: &BsdeSolution) -> (Vec<f64>, Vec<f64>) {
    let h = a.grid.mesh();
    let m = a.y.nrows();
    let mut ye = vec![0.0f64; m];
    let mut ze = vec![0.0f64; m];
    for i in 0..=a.grid.steps() {
        for ((e, x), y) in ye.iter_mut().zip(a.y_column(i)).zip(b.y_column(i)) {
            *e = e.max((x - y).abs());
        }
    }
    for i in 0..a.grid.steps() {
        for ((e, x), y) in ze.iter_mut().zip(a.z_column(i)).zip(b.z_column(i)) {
            *e += h * (x - y).powi(2);
        }
    }
    (ye, ze)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::market::{simulate_index, GeometricParams};
    use crate::rng::SeedSpec;
    use crate::solver::RegressionBasis;

    fn setup(rho: f64, paths: usize) -> (MarketModel, PathBatch) {
        let m = MarketModel::geometric(&GeometricParams { rho, ..Default::default() });
        let b = simulate_index(&m, &build_grid(1.0, 20).unwrap(), paths, SeedSpec::new(8, 0)).unwrap();
        (m, b)
    }

    #[test]
    fn large_level_matches_reference() {
        let (m, b) = setup(0.5, 10_000);
        let put = PayoffSpec::put(200.0).unwrap().scaled(0.1).unwrap();
        let cfg = SolverConfig::new(RegressionBasis::standard(&put));
        let rep = truncation_study(&m, &put, &[1, 2, 4, 8, 32], &b, &cfg).unwrap();
        let last = rep.rows.last().unwrap();
        assert!(last.max_abs_z < 32.0);
        let se = (last.y0_stderr.powi(2) + rep.reference_y0_stderr.powi(2)).sqrt();
        assert!((last.y0 - rep.reference_y0).abs() < 3.0 * se, "{} vs {}", last.y0, rep.reference_y0);
        assert!(rep.monotone(), "{rep:?}");
        assert!(rep.rows.iter().all(|r| r.y_error >= 0.0 && r.z_error >= 0.0));
        assert_eq!(rep.reference_method, "cole-hopf");
        // ordering of time-zero errors
        let d = |k: usize| (rep.rows[k].y0 - rep.rows[3].y0).abs();
        assert!(d(0) >= d(2));
    }

    #[test]
    fn inactive_truncation_is_bitwise_identical() {
        let (m, b) = setup(1.0, 4_000);
        let small = PayoffSpec::table(vec![(100.0, 0.2), (200.0, 0.0)]).unwrap();
        let cfg = SolverConfig::new(RegressionBasis::standard(&small));
        let rep = truncation_study(&m, &small, &[1, 2, 4, 8], &b, &cfg).unwrap();
        assert_eq!(rep.reference_method, "direct");
        assert!(rep.rows[0].max_abs_z < 1.0);
        for r in &rep.rows {
            assert_eq!(r.y0.to_bits(), rep.rows[0].y0.to_bits());
            assert_eq!(r.y_error.to_bits(), rep.rows[0].y_error.to_bits());
        }
    }

    #[test]
    fn rejects_zero_level() {
        let (m, b) = setup(0.5, 200);
        let put = PayoffSpec::put(200.0).unwrap();
        let cfg = SolverConfig::new(RegressionBasis::standard(&put));
        assert!(matches!(truncation_study(&m, &put, &[0], &b, &cfg), Err(Error::Config(_))));
        assert!(matches!(truncation_study(&m, &put, &[], &b, &cfg), Err(Error::Config(_))));
    }
}
