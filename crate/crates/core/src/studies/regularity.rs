//! L2 path regularity of the control process.
//!
//! For a coarse grid with mesh `h` the statistic is
//! `sum_i E int_{t_i}^{t_{i+1}} |Z_s - Zbar_i|^2 ds` with `Zbar_i` the conditional mean of
//! the interval average of `Z` given `X_{t_i}`; it is `O(h)`, as is the increment
//! statistic `max_i sup_{t in [t_i, t_{i+1}]} E|Y_t - Y_{t_i}|^2`.
//!
//! The analytic case is the zero-driver equation on a geometric index with terminal
//! `A Phi((log K - log r) / w)`, whose value and control are known in closed form.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::fit::{fit_loglog, SlopeFit};
use crate::analytic::{gauss_hermite, norm_cdf, norm_pdf};
use crate::drivers::ZeroDriver;
use crate::error::{Error, Result};
use crate::grid::{build_grid, TimeGrid};
use crate::market::{simulate_index, MarketModel};
use crate::parallel::{block_map, mean_stderr};
use crate::paths::{column, from_time_major};
use crate::rng::SeedSpec;
use crate::solver::{regress, solve_lipschitz, RegressionBasis, SolverConfig};

/// Smooth bounded terminal `A Phi((log K - log r) / w)` on a geometric index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothDigital {
    pub amplitude: f64,
    pub strike: f64,
    pub width: f64,
    pub mu: f64,
    pub sigma: f64,
    pub horizon: f64,
}

pub fn smooth_digital(model: &MarketModel, amplitude: f64, strike: f64, width: f64) -> Result<SmoothDigital> {
    let (mu, sigma) = model
        .geometric_index()
        .ok_or_else(|| Error::config("the analytic regularity case needs a geometric index"))?;
    if !(strike > 0.0 && width > 0.0 && amplitude.is_finite()) {
        return Err(Error::config("smooth digital needs positive strike and width and a finite amplitude"));
    }
    Ok(SmoothDigital { amplitude, strike, width, mu, sigma, horizon: model.horizon })
}

impl SmoothDigital {
    fn d(&self, t: f64, r: f64) -> (f64, f64) {
        let tau = (self.horizon - t).max(0.0);
        let v = (self.width * self.width + self.sigma * self.sigma * tau).sqrt();
        let d = (self.strike.ln() - r.ln() - (self.mu - 0.5 * self.sigma * self.sigma) * tau) / v;
        (d, v)
    }

    pub fn terminal(&self, r: f64) -> f64 {
        self.amplitude * norm_cdf((self.strike.ln() - r.ln()) / self.width)
    }

    /// `u(t, r) = E[g(R_T) | R_t = r]`.
    pub fn value(&self, t: f64, r: f64) -> f64 {
        self.amplitude * norm_cdf(self.d(t, r).0)
    }

    /// `Z_t = sigma r du/dr`.
    pub fn control(&self, t: f64, r: f64) -> f64 {
        let (d, v) = self.d(t, r);
        -self.amplitude * self.sigma * norm_pdf(d) / v
    }

    /// `E[Z_s | R_t = r]` by Gauss-Hermite quadrature over the lognormal transition.
    pub fn conditional_control(&self, t: f64, r: f64, s: f64, nodes: usize) -> f64 {
        let dt = s - t;
        if dt <= 0.0 {
            return self.control(t, r);
        }
        let (x, w) = gauss_hermite(nodes);
        let drift = (self.mu - 0.5 * self.sigma * self.sigma) * dt;
        let vol = self.sigma * dt.sqrt();
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| wi * self.control(s, r * (drift + vol * xi).exp()))
            .sum()
    }
}

/// How `Zbar` is conditioned on `X_{t_i}`.
pub enum ConditionalMean<'a> {
    /// Regression of the interval averages on the basis at the coarse-node states.
    Regression(&'a RegressionBasis),
    /// Known conditional mean `f(t_i, x, t_{i+1})` of the interval average.
    Analytic(&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)),
}

/// Quadrature weights on `r` fine steps of size `hf`: Simpson when `r` is even.
fn weights(r: usize, hf: f64) -> Vec<f64> {
    if r % 2 == 0 {
        (0..=r)
            .map(|j| {
                if j == 0 || j == r {
                    hf / 3.0
                } else if j % 2 == 1 {
                    4.0 * hf / 3.0
                } else {
                    2.0 * hf / 3.0
                }
            })
            .collect()
    } else {
        (0..=r).map(|j| if j == 0 || j == r { hf / 2.0 } else { hf }).collect()
    }
}

/// Integration rule over one coarse interval of `r` fine steps.
///
/// Node values (`N_f + 1` per path) use Simpson/trapezoid weights; left-point values
/// (`N_f` per path, piecewise constant) use the rectangle rule.
struct Rule {
    r: usize,
    w: Vec<f64>,
    nodes: bool,
}

impl Rule {
    fn new(r: usize, hf: f64, nodes: bool) -> Self {
        let w = if nodes { weights(r, hf) } else { vec![hf; r] };
        Rule { r, w, nodes }
    }

    fn values<'z>(&self, z: &'z [f64], i: usize) -> &'z [f64] {
        let len = if self.nodes { self.r + 1 } else { self.r };
        &z[i * self.r..i * self.r + len]
    }

    fn integral(&self, z: &[f64], i: usize) -> f64 {
        self.values(z, i).iter().zip(&self.w).map(|(a, b)| a * b).sum()
    }

    fn sq_dev(&self, z: &[f64], i: usize, c: f64) -> f64 {
        self.values(z, i).iter().zip(&self.w).map(|(a, b)| b * (a - c) * (a - c)).sum()
    }
}

fn nesting(fine: &TimeGrid, coarse: &TimeGrid) -> Result<usize> {
    fine.refinement_of(coarse)
        .ok_or_else(|| Error::config("fine grid does not refine the coarse grid"))
}

fn rule_for(z: &Array2<f64>, fine: &TimeGrid, r: usize) -> Result<Rule> {
    let nf = fine.steps();
    match z.ncols() {
        c if c == nf + 1 => Ok(Rule::new(r, fine.mesh(), true)),
        c if c == nf => Ok(Rule::new(r, fine.mesh(), false)),
        c => Err(Error::config(format!("control array has {c} columns for a {nf}-step grid"))),
    }
}

/// Piecewise-constant best approximation `Zbar` (`M x N_coarse`) of `z` sampled on `fine`.
///
/// `z` holds either node values (`N_f + 1` columns) or left-point values (`N_f` columns);
/// `states` holds the forward state on `fine` (`N_f + 1` columns).
pub fn zbar(
    z: &Array2<f64>,
    states: &Array2<f64>,
    fine: &TimeGrid,
    coarse: &TimeGrid,
    mode: ConditionalMean<'_>,
) -> Result<Array2<f64>> {
    let r = nesting(fine, coarse)?;
    let rule = rule_for(z, fine, r)?;
    let m = z.nrows();
    if states.dim() != (m, fine.steps() + 1) {
        return Err(Error::config("state array does not match the fine grid"));
    }
    let h = coarse.mesh();
    let rows: Vec<Vec<f64>> = (0..m).map(|k| z.row(k).to_vec()).collect();
    let mut out = Vec::with_capacity(m * coarse.steps());
    for i in 0..coarse.steps() {
        let avg: Vec<f64> = rows.iter().map(|zk| rule.integral(zk, i) / h).collect();
        let x = states.column(i * r).to_vec();
        match &mode {
            ConditionalMean::Regression(basis) => out.extend(regress(&avg, &x, basis)?.fitted),
            ConditionalMean::Analytic(f) => {
                let (t0, t1) = (coarse.node(i), coarse.node(i + 1));
                out.extend(x.iter().map(|xk| f(t0, *xk, t1)));
            }
        }
    }
    Ok(from_time_major(m, coarse.steps(), out))
}

/// Per-path `sum_i int_{t_i}^{t_{i+1}} |Z_s - Zbar_i|^2 ds`.
pub fn regularity_statistic(z: &Array2<f64>, zbar: &Array2<f64>, fine: &TimeGrid, coarse: &TimeGrid) -> Result<Vec<f64>> {
    let r = nesting(fine, coarse)?;
    let rule = rule_for(z, fine, r)?;
    if zbar.dim() != (z.nrows(), coarse.steps()) {
        return Err(Error::config("Zbar does not match the coarse grid"));
    }
    Ok((0..z.nrows())
        .map(|k| {
            let zk = z.row(k).to_vec();
            (0..coarse.steps()).map(|i| rule.sq_dev(&zk, i, zbar[(k, i)])).sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularityMode {
    /// Closed-form `Y` and `Z` on finely simulated paths.
    #[default]
    Analytic,
    /// LSMC estimates on the finest grid; carries `O(1/sqrt(M))` noise.
    Solver,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityConfig {
    pub refinements: Vec<usize>,
    pub paths: usize,
    /// Fine steps per step of the finest refinement (analytic mode).
    pub fine_factor: usize,
    pub amplitude: f64,
    /// Defaults to the spot `r0`.
    pub strike: Option<f64>,
    pub width: f64,
    pub mode: RegularityMode,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        RegularityConfig {
            refinements: vec![25, 50, 100, 200],
            paths: 20_000,
            fine_factor: 8,
            amplitude: 1.0,
            strike: None,
            width: 0.25,
            mode: RegularityMode::Analytic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularityRow {
    pub steps: usize,
    pub h: f64,
    pub y_stat: f64,
    pub y_stat_se: f64,
    pub z_stat: f64,
    pub z_stat_se: f64,
    /// Statistic with `Zbar` replaced by `Z_{t_i}`.
    pub z_left: f64,
    pub z_left_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub mode: RegularityMode,
    pub rows: Vec<RegularityRow>,
    pub y_slope: SlopeFit,
    pub z_slope: SlopeFit,
    /// `z_stat <= z_left` on every row.
    pub optimality: bool,
}

impl RegularityReport {
    pub fn passes(&self, lo: f64, hi: f64) -> bool {
        self.optimality && self.y_slope.within(lo, hi) && self.z_slope.within(lo, hi)
    }
}

pub fn regularity_study(model: &MarketModel, cfg: &RegularityConfig, seed: SeedSpec) -> Result<RegularityReport> {
    if cfg.refinements.len() < 2 || cfg.refinements.contains(&0) {
        return Err(Error::config("regularity study needs at least two positive refinements"));
    }
    if cfg.paths < 2 || cfg.fine_factor == 0 {
        return Err(Error::config("regularity study needs at least 2 paths and a positive fine factor"));
    }
    let nmax = *cfg.refinements.iter().max().expect("nonempty");
    if let Some(n) = cfg.refinements.iter().find(|n| nmax % **n != 0) {
        return Err(Error::config(format!("refinement {n} does not divide the finest refinement {nmax}")));
    }
    let sd = smooth_digital(model, cfg.amplitude, cfg.strike.unwrap_or(model.r0), cfg.width)?;
    let rows = match cfg.mode {
        RegularityMode::Analytic => analytic_rows(model, &sd, cfg, nmax * cfg.fine_factor, seed)?,
        RegularityMode::Solver => solver_rows(model, &sd, cfg, nmax, seed)?,
    };
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let y_slope = fit_loglog(&hs, &rows.iter().map(|r| r.y_stat).collect::<Vec<_>>())?;
    let z_slope = fit_loglog(&hs, &rows.iter().map(|r| r.z_stat).collect::<Vec<_>>())?;
    let optimality = rows.iter().all(|r| r.z_stat <= r.z_left * (1.0 + 1e-9) + 1e-15);
    Ok(RegularityReport { mode: cfg.mode, rows, y_slope, z_slope, optimality })
}

/// Per-level running sums over paths.
#[derive(Clone)]
struct Acc {
    /// Node-wise sums of `(Y_s - Y_{t_i(s)})^2` and of its square.
    y: Vec<f64>,
    y2: Vec<f64>,
    z: f64,
    z2: f64,
    zl: f64,
    zl2: f64,
}

impl Acc {
    fn new(nodes: usize) -> Self {
        Acc { y: vec![0.0; nodes], y2: vec![0.0; nodes], z: 0.0, z2: 0.0, zl: 0.0, zl2: 0.0 }
    }

    fn add(&mut self, o: &Acc) {
        for (a, b) in self.y.iter_mut().zip(&o.y) {
            *a += b;
        }
        for (a, b) in self.y2.iter_mut().zip(&o.y2) {
            *a += b;
        }
        self.z += o.z;
        self.z2 += o.z2;
        self.zl += o.zl;
        self.zl2 += o.zl2;
    }
}

fn moments(sum: f64, sum2: f64, m: usize) -> (f64, f64) {
    let n = m as f64;
    let mean = sum / n;
    let var = ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

fn analytic_rows(
    model: &MarketModel,
    sd: &SmoothDigital,
    cfg: &RegularityConfig,
    fine: usize,
    seed: SeedSpec,
) -> Result<Vec<RegularityRow>> {
    let grid = build_grid(model.horizon, fine)?;
    let hf = grid.mesh();
    let (mu, sigma) = (sd.mu, sd.sigma);
    let drift = (mu - 0.5 * sigma * sigma) * hf;
    let vol = sigma * hf.sqrt();
    let rules: Vec<(usize, Rule)> = cfg
        .refinements
        .iter()
        .map(|n| (*n, Rule::new(fine / n, hf, true)))
        .collect();
    let levels = rules.len();

    let partials = block_map(cfg.paths, |range| {
        let mut acc = vec![Acc::new(fine + 1); levels];
        let mut r = vec![0.0; fine + 1];
        let mut y = vec![0.0; fine + 1];
        let mut z = vec![0.0; fine + 1];
        for k in range {
            let mut normals = seed.path_normals(k as u64);
            r[0] = model.r0;
            for j in 0..fine {
                let (w, _) = normals.next_pair();
                r[j + 1] = r[j] * (drift + vol * w).exp();
            }
            for j in 0..=fine {
                let t = grid.node(j);
                y[j] = sd.value(t, r[j]);
                z[j] = sd.control(t, r[j]);
            }
            for ((n, rule), a) in rules.iter().zip(acc.iter_mut()) {
                let step = rule.r;
                let (mut zs, mut zl) = (0.0, 0.0);
                for i in 0..*n {
                    let base = i * step;
                    // Z is a martingale here, so E[Z_s | R_{t_i}] = Z_{t_i} for s >= t_i.
                    let zb = z[base];
                    zs += rule.sq_dev(&z, i, zb);
                    zl += rule.sq_dev(&z, i, z[base]);
                    for j in base + 1..=base + step {
                        let d = (y[j] - y[base]).powi(2);
                        a.y[j] += d;
                        a.y2[j] += d * d;
                    }
                }
                a.z += zs;
                a.z2 += zs * zs;
                a.zl += zl;
                a.zl2 += zl * zl;
            }
        }
        acc
    });
    let mut total = vec![Acc::new(fine + 1); levels];
    for p in &partials {
        for (t, a) in total.iter_mut().zip(p) {
            t.add(a);
        }
    }
    Ok(rules
        .iter()
        .zip(&total)
        .map(|((n, _), a)| {
            let m = cfg.paths;
            let (j, _) = a
                .y
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .expect("nonempty");
            let (y_stat, y_stat_se) = moments(a.y[j], a.y2[j], m);
            let (z_stat, z_stat_se) = moments(a.z, a.z2, m);
            let (z_left, z_left_se) = moments(a.zl, a.zl2, m);
            RegularityRow { steps: *n, h: model.horizon / *n as f64, y_stat, y_stat_se, z_stat, z_stat_se, z_left, z_left_se }
        })
        .collect())
}

fn solver_rows(
    model: &MarketModel,
    sd: &SmoothDigital,
    cfg: &RegularityConfig,
    nmax: usize,
    seed: SeedSpec,
) -> Result<Vec<RegularityRow>> {
    let fine = build_grid(model.horizon, nmax)?;
    let batch = simulate_index(model, &fine, cfg.paths, seed)?;
    let basis = RegressionBasis::monomials(0..=4)?;
    let terminal = |r: f64| sd.terminal(r);
    let sol = solve_lipschitz(&ZeroDriver, &terminal, &batch, &SolverConfig::new(basis.clone()))?;
    let m = cfg.paths;
    let mut rows = Vec::new();
    for &n in &cfg.refinements {
        let coarse = build_grid(model.horizon, n)?;
        let r = nmax / n;
        let zb = zbar(&sol.z, batch.states(), &fine, &coarse, ConditionalMean::Regression(&basis))?;
        let z_stat = regularity_statistic(&sol.z, &zb, &fine, &coarse)?;
        let left: Vec<f64> = (0..n).flat_map(|i| column(&sol.z, i * r).to_vec()).collect();
        let z_left = regularity_statistic(&sol.z, &from_time_major(m, n, left), &fine, &coarse)?;
        let mut best = (0.0, 0.0);
        for i in 0..n {
            let y0 = sol.y_column(i * r);
            for j in i * r + 1..=(i + 1) * r {
                let d: Vec<f64> = sol.y_column(j).iter().zip(y0).map(|(a, b)| (a - b).powi(2)).collect();
                let ms = mean_stderr(&d);
                if ms.0 > best.0 {
                    best = ms;
                }
            }
        }
        let (zs, zse) = mean_stderr(&z_stat);
        let (zl, zlse) = mean_stderr(&z_left);
        rows.push(RegularityRow {
            steps: n,
            h: coarse.mesh(),
            y_stat: best.0,
            y_stat_se: best.1,
            z_stat: zs,
            z_stat_se: zse,
            z_left: zl,
            z_left_se: zlse,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::GeometricParams;
    use crate::rng::streams;

    fn model() -> MarketModel {
        MarketModel::geometric(&GeometricParams::default())
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let sd = smooth_digital(&model(), 1.0, 170.0, 0.25).unwrap();
        let (x, w) = gauss_hermite(40);
        for &(t, r) in &[(0.0, 170.0), (0.5, 120.0), (0.9, 230.0)] {
            let tau: f64 = 1.0 - t;
            let v: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * sd.terminal(r * ((0.12 - 0.5 * 0.41 * 0.41) * tau + 0.41 * tau.sqrt() * xi).exp()))
                .sum();
            assert!((v - sd.value(t, r)).abs() < 1e-6, "{v} vs {}", sd.value(t, r));
            let eps = 1e-4 * r;
            let fd = 0.41 * r * (sd.value(t, r + eps) - sd.value(t, r - eps)) / (2.0 * eps);
            assert!((fd - sd.control(t, r)).abs() < 1e-6);
        }
    }

    #[test]
    fn control_is_a_martingale() {
        let sd = smooth_digital(&model(), 1.0, 170.0, 0.25).unwrap();
        for &(t, r, s) in &[(0.0, 170.0, 0.3), (0.2, 150.0, 0.21), (0.6, 200.0, 1.0)] {
            let c = sd.conditional_control(t, r, s, 40);
            assert!((c - sd.control(t, r)).abs() < 1e-7, "{c} vs {}", sd.control(t, r));
        }
    }

    #[test]
    fn constant_control_has_zero_statistic() {
        let fine = build_grid(1.0, 8).unwrap();
        let coarse = build_grid(1.0, 2).unwrap();
        let z = Array2::from_elem((5, 9), 0.7);
        let x = Array2::from_shape_fn((5, 9), |(k, j)| 100.0 + k as f64 + j as f64);
        let basis = RegressionBasis::monomials([0]).unwrap();
        let zb = zbar(&z, &x, &fine, &coarse, ConditionalMean::Regression(&basis)).unwrap();
        assert!(zb.iter().all(|v| (v - 0.7).abs() < 1e-14));
        let s = regularity_statistic(&z, &zb, &fine, &coarse).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-28));
    }

    #[test]
    fn linear_control_gives_midpoint() {
        let (h, slope) = (0.5, 3.0);
        let fine = build_grid(h, 10).unwrap();
        let coarse = build_grid(h, 1).unwrap();
        let z = Array2::from_shape_fn((3, 11), |(_, j)| 1.0 + slope * fine.node(j));
        let x = Array2::from_elem((3, 11), 1.0);
        let mid = |_: f64, _: f64, _: f64| 1.0 + slope * h / 2.0;
        let zb = zbar(&z, &x, &fine, &coarse, ConditionalMean::Regression(&RegressionBasis::monomials([0]).unwrap()))
            .unwrap();
        assert!((zb[(0, 0)] - mid(0.0, 0.0, 0.0)).abs() < 1e-13);
        let s = regularity_statistic(&z, &zb, &fine, &coarse).unwrap();
        assert!((s[0] - slope * slope * h.powi(3) / 12.0).abs() < 1e-13);
        let za = zbar(&z, &x, &fine, &coarse, ConditionalMean::Analytic(&mid)).unwrap();
        assert!(za.iter().zip(&zb).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn non_nesting_grids_rejected() {
        let z = Array2::zeros((2, 11));
        let x = Array2::ones((2, 11));
        let r = zbar(
            &z,
            &x,
            &build_grid(1.0, 10).unwrap(),
            &build_grid(1.0, 3).unwrap(),
            ConditionalMean::Regression(&RegressionBasis::monomials([0]).unwrap()),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn analytic_statistics_scale_like_h() {
        let cfg = RegularityConfig { refinements: vec![10, 20, 40], paths: 4_000, ..Default::default() };
        let rep = regularity_study(&model(), &cfg, SeedSpec::new(1, streams::REGULARITY)).unwrap();
        assert!(rep.z_slope.within(0.8, 1.2), "{:?}", rep.z_slope);
        assert!(rep.y_slope.within(0.8, 1.2), "{:?}", rep.y_slope);
        assert!(rep.optimality);
        let ratio = rep.rows[1].z_stat / rep.rows[2].z_stat;
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn doubling_paths_is_consistent() {
        let base = RegularityConfig { refinements: vec![10, 20], paths: 3_000, ..Default::default() };
        let a = regularity_study(&model(), &base, SeedSpec::new(4, 3)).unwrap();
        let b = regularity_study(&model(), &RegularityConfig { paths: 6_000, ..base }, SeedSpec::new(5, 3)).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            let se = (x.z_stat_se.powi(2) + y.z_stat_se.powi(2)).sqrt();
            assert!((x.z_stat - y.z_stat).abs() < 3.0 * se);
        }
    }

    #[test]
    fn solver_mode_runs_and_keeps_optimality() {
        let cfg = RegularityConfig {
            refinements: vec![5, 10, 20],
            paths: 5_000,
            mode: RegularityMode::Solver,
            ..Default::default()
        };
        let rep = regularity_study(&model(), &cfg, SeedSpec::new(2, 3)).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.optimality);
        assert!(rep.rows.iter().all(|r| r.z_stat >= 0.0 && r.y_stat >= 0.0));
    }
}
