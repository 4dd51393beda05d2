use std::path::PathBuf;

use clap::ValueEnum;

use qgfbsde_core::rng::streams;
use qgfbsde_core::studies::{
    regularity_study, sde_scaling_study, truncation_study, RegularityConfig, ScalingConfig,
};
use qgfbsde_core::{
    build_grid, distortion_oracle, price_indifference, simulate_asset, simulate_index, PriceReport, SeedSpec,
};

use crate::config::{PayoffKindName, RunConfig};
use crate::error::CliError;
use crate::output::{num, write_csv, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    Regularity,
    Truncation,
    SdeScaling,
}

fn seed(cfg: &RunConfig, stream: u64) -> SeedSpec {
    SeedSpec::new(cfg.seed.master, stream)
}

/// Index and asset paths for every correlation in the sweep; the index paths are shared.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.model();
    let grid = build_grid(model.horizon, cfg.numerics.steps)?;
    let s = seed(cfg, streams::INDEX);
    let index = simulate_index(&model, &grid, cfg.sweep.simulate_paths, s)?;
    let mut t = Table::new(&["time", "path", "R", "S", "rho"]);
    for &rho in &cfg.sweep.rhos {
        let asset = simulate_asset(&model.with_rho(rho), &index)?;
        for k in 0..index.paths() {
            for i in 0..=grid.steps() {
                t.push(vec![
                    num(grid.node(i)),
                    k.to_string(),
                    num(index.states()[(k, i)]),
                    num(asset.states()[(k, i)]),
                    num(rho),
                ]);
            }
        }
    }
    Ok(vec![write_csv(&cfg.output.dir, "paths.csv", "simulate", &cfg.hash(), s, &t)?])
}

struct Priced {
    report: PriceReport,
    oracle: Option<(f64, f64)>,
}

fn price(cfg: &RunConfig, rho: f64, r0: f64, strike: f64) -> Result<Priced, CliError> {
    let model = cfg.model().with_rho(rho).with_spot(r0);
    let payoff = cfg.payoff(Some(strike))?;
    let solver = cfg.solver(&payoff)?;
    let grid = build_grid(model.horizon, cfg.numerics.steps)?;
    let report = price_indifference(&model, &payoff, &grid, cfg.numerics.paths, seed(cfg, streams::INDEX), &solver)?;
    let oracle = if model.constant_theta().is_some() && model.geometric_index().is_some() {
        Some(distortion_oracle(&model, &payoff, cfg.numerics.oracle_paths, seed(cfg, streams::ORACLE))?)
    } else {
        None
    };
    Ok(Priced { report, oracle })
}

const SWEEP_COLUMNS: [&str; 10] = [
    "rho",
    "strike",
    "spot",
    "p0",
    "stderr",
    "oracle",
    "oracle_stderr",
    "iterations_claim",
    "iterations_zero",
    "converged",
];

fn sweep_row(rho: f64, strike: f64, spot: f64, p: &Priced) -> Vec<String> {
    let (o, ose) = p.oracle.map(|(a, b)| (num(a), num(b))).unwrap_or_default();
    let m = &p.report.metadata;
    vec![
        num(rho),
        num(strike),
        num(spot),
        num(p.report.p0),
        num(p.report.p0_stderr),
        o,
        ose,
        m.iterations.0.to_string(),
        m.iterations.1.to_string(),
        m.converged.to_string(),
    ]
}

/// Strike sweep, spot sweep, and the price and strategy processes.
pub fn cmd_price(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let hash = cfg.hash();
    let s = seed(cfg, streams::INDEX);
    let dir = &cfg.output.dir;
    let r0 = cfg.market.r0;
    let mut written = Vec::new();

    let mut strikes = Table::new(&SWEEP_COLUMNS);
    if cfg.payoff.kind != PayoffKindName::Table {
        for &rho in &cfg.sweep.rhos {
            for &k in &cfg.sweep.strikes {
                strikes.push(sweep_row(rho, k, r0, &price(cfg, rho, r0, k)?));
            }
        }
    }
    written.push(write_csv(dir, "strike_sweep.csv", "price", &hash, s, &strikes)?);

    let mut spots = Table::new(&SWEEP_COLUMNS);
    let k = cfg.sweep.spot_strike;
    for &rho in &cfg.sweep.rhos {
        for &spot in &cfg.sweep.spots {
            spots.push(sweep_row(rho, k, spot, &price(cfg, rho, spot, k)?));
        }
    }
    written.push(write_csv(dir, "spot_sweep.csv", "price", &hash, s, &spots)?);

    let cols = ["rho", "time", "mean", "stderr", "sample"];
    let mut prices = Table::new(&cols);
    let mut strategies = Table::new(&cols);
    let sample = cfg.sweep.sample_path;
    for &rho in &cfg.sweep.rhos {
        let p = price(cfg, rho, r0, cfg.sweep.path_strike)?.report;
        for i in 0..=p.grid.steps() {
            prices.push(vec![
                num(rho),
                num(p.grid.node(i)),
                num(p.price_mean[i]),
                num(p.price_stderr[i]),
                num(p.price[(sample, i)]),
            ]);
        }
        for i in 0..p.grid.steps() {
            strategies.push(vec![
                num(rho),
                num(p.grid.node(i)),
                num(p.strategy_mean[i]),
                num(p.strategy_stderr[i]),
                num(p.strategy[(sample, i)]),
            ]);
        }
    }
    written.push(write_csv(dir, "price_path.csv", "price", &hash, s, &prices)?);
    written.push(write_csv(dir, "strategy_path.csv", "price", &hash, s, &strategies)?);
    Ok(written)
}

fn pass(b: bool) -> String {
    b.to_string()
}

/// Runs one study, writes its CSVs and fails with exit code 4 when a check fails.
pub fn cmd_study(cfg: &RunConfig, which: StudyKind) -> Result<Vec<PathBuf>, CliError> {
    let hash = cfg.hash();
    let dir = &cfg.output.dir;
    let model = cfg.model();
    let st = &cfg.study;
    let mut failures = Vec::new();
    let written = match which {
        StudyKind::Regularity => {
            let s = seed(cfg, streams::REGULARITY);
            let rc = RegularityConfig {
                refinements: st.refinements.clone(),
                paths: st.regularity_paths,
                fine_factor: st.fine_factor,
                amplitude: st.digital_amplitude,
                strike: None,
                width: st.digital_width,
                mode: st.regularity_mode,
            };
            let rep = regularity_study(&model, &rc, s)?;
            let mut t = Table::new(&["steps", "h", "y_stat", "y_stat_se", "z_stat", "z_stat_se", "z_left", "z_left_se"]);
            for r in &rep.rows {
                t.push(vec![
                    r.steps.to_string(),
                    num(r.h),
                    num(r.y_stat),
                    num(r.y_stat_se),
                    num(r.z_stat),
                    num(r.z_stat_se),
                    num(r.z_left),
                    num(r.z_left_se),
                ]);
            }
            let (lo, hi) = st.slope_range;
            let mut sum = Table::new(&["check", "value", "stderr", "lower", "upper", "pass"]);
            for (name, f) in [("y_increment_slope", rep.y_slope), ("z_regularity_slope", rep.z_slope)] {
                let ok = f.within(lo, hi);
                if !ok {
                    failures.push(format!("{name} = {} outside [{lo}, {hi}]", f.slope));
                }
                sum.push(vec![name.into(), num(f.slope), num(f.slope_stderr), num(lo), num(hi), pass(ok)]);
            }
            if !rep.optimality {
                failures.push("piecewise-constant optimality violated".into());
            }
            sum.push(vec!["zbar_optimality".into(), String::new(), String::new(), String::new(), String::new(), pass(rep.optimality)]);
            vec![
                write_csv(dir, "regularity.csv", "study regularity", &hash, s, &t)?,
                write_csv(dir, "regularity_summary.csv", "study regularity", &hash, s, &sum)?,
            ]
        }
        StudyKind::Truncation => {
            let s = seed(cfg, streams::INDEX);
            let payoff = cfg.payoff(None)?.scaled(st.truncation_payoff_scale)?;
            let solver = cfg.solver(&payoff)?;
            let grid = build_grid(model.horizon, cfg.numerics.steps)?;
            let batch = simulate_index(&model, &grid, cfg.numerics.paths, s)?;
            let rep = truncation_study(&model, &payoff, &st.truncation_levels, &batch, &solver)?;
            let mut t = Table::new(&[
                "level",
                "y_error",
                "y_error_se",
                "z_error",
                "z_error_se",
                "y0",
                "y0_stderr",
                "max_abs_z",
                "iterations",
                "monotone",
                "reference_method",
                "reference_y0",
                "reference_y0_stderr",
                "reference_max_abs_z",
                "payoff_scale",
            ]);
            for r in &rep.rows {
                t.push(vec![
                    r.level.to_string(),
                    num(r.y_error),
                    num(r.y_error_se),
                    num(r.z_error),
                    num(r.z_error_se),
                    num(r.y0),
                    num(r.y0_stderr),
                    num(r.max_abs_z),
                    r.iterations.to_string(),
                    pass(r.monotone),
                    rep.reference_method.into(),
                    num(rep.reference_y0),
                    num(rep.reference_y0_stderr),
                    num(rep.reference_max_abs_z),
                    num(st.truncation_payoff_scale),
                ]);
            }
            if !rep.monotone() {
                failures.push("truncation errors increase with the level".into());
            }
            vec![write_csv(dir, "truncation.csv", "study truncation", &hash, s, &t)?]
        }
        StudyKind::SdeScaling => {
            let s = seed(cfg, streams::SCALING);
            let sc = ScalingConfig {
                spans: st.scaling_spans.clone(),
                powers: st.scaling_powers.clone(),
                paths: st.scaling_paths,
                substeps: st.scaling_substeps,
            };
            let rep = sde_scaling_study(&model, &sc, s)?;
            let mut t = Table::new(&["span", "p", "moment", "stderr"]);
            for r in &rep.rows {
                t.push(vec![num(r.span), r.p.to_string(), num(r.moment), num(r.stderr)]);
            }
            let mut sum = Table::new(&["p", "slope", "slope_stderr", "lower", "upper", "pass"]);
            for (p, f) in &rep.slopes {
                let (lo, hi) = (0.4 * *p as f64, 0.6 * *p as f64);
                let ok = f.within(lo, hi);
                if !ok {
                    failures.push(format!("p = {p} slope {} outside [{lo}, {hi}]", f.slope));
                }
                sum.push(vec![p.to_string(), num(f.slope), num(f.slope_stderr), num(lo), num(hi), pass(ok)]);
            }
            vec![
                write_csv(dir, "scaling.csv", "study sde-scaling", &hash, s, &t)?,
                write_csv(dir, "scaling_summary.csv", "study sde-scaling", &hash, s, &sum)?,
            ]
        }
    };
    if failures.is_empty() {
        Ok(written)
    } else {
        Err(CliError::StudyFailed(failures.join("; ")))
    }
}
