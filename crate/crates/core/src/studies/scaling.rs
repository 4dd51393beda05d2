//! Moment scaling `E[sup_{u <= s} |R_u - R_0|^p] ~ s^{p/2}` of the forward index.

use serde::Serialize;

use super::fit::{fit_loglog, SlopeFit};
use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::parallel::block_map;
use crate::rng::SeedSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingConfig {
    /// Increment spans, e.g. `{h, 2h, 4h, 8h}`.
    pub spans: Vec<f64>,
    pub powers: Vec<u32>,
    pub paths: usize,
    /// Exact substeps inside the smallest span used to resolve the supremum.
    pub substeps: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig { spans: vec![0.01, 0.02, 0.04, 0.08], powers: vec![2, 4], paths: 70_000, substeps: 32 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub span: f64,
    pub p: u32,
    pub moment: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// One fit per power.
    pub slopes: Vec<(u32, SlopeFit)>,
}

impl ScalingReport {
    /// Every fitted slope lies within `p/2 +- 0.1 p`.
    pub fn passes(&self) -> bool {
        self.slopes
            .iter()
            .all(|(p, f)| f.within(0.4 * *p as f64, 0.6 * *p as f64))
    }
}

/// All spans share the same simulated paths (common random numbers). The sup is taken
/// over a uniform substep grid of width `min(spans) / substeps`.
pub fn sde_scaling_study(model: &MarketModel, cfg: &ScalingConfig, seed: SeedSpec) -> Result<ScalingReport> {
    let (mu, sigma) = model
        .geometric_index()
        .ok_or_else(|| Error::config("the scaling study needs a geometric index"))?;
    if cfg.spans.len() < 2 || cfg.spans.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::config("scaling study needs at least two positive spans"));
    }
    if cfg.powers.is_empty() || cfg.powers.contains(&0) || cfg.paths < 2 || cfg.substeps == 0 {
        return Err(Error::config("scaling study needs positive powers, substeps and at least 2 paths"));
    }
    let dt = cfg.spans.iter().cloned().fold(f64::INFINITY, f64::min) / cfg.substeps as f64;
    let ends: Vec<usize> = cfg.spans.iter().map(|s| (s / dt).round() as usize).collect();
    let total = *ends.iter().max().expect("nonempty");
    let drift = (mu - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();
    let cells = cfg.spans.len() * cfg.powers.len();

    let partials = block_map(cfg.paths, |range| {
        let mut sum = vec![0.0; cells];
        let mut sum2 = vec![0.0; cells];
        let mut sup = vec![0.0f64; total + 1];
        for k in range {
            let mut normals = seed.path_normals(k as u64);
            let mut r = model.r0;
            for j in 1..=total {
                let (w, _) = normals.next_pair();
                r *= (drift + vol * w).exp();
                sup[j] = sup[j - 1].max((r - model.r0).abs());
            }
            for (si, &e) in ends.iter().enumerate() {
                for (pi, &p) in cfg.powers.iter().enumerate() {
                    let v = sup[e].powi(p as i32);
                    let c = si * cfg.powers.len() + pi;
                    sum[c] += v;
                    sum2[c] += v * v;
                }
            }
        }
        (sum, sum2)
    });
    let mut sum = vec![0.0; cells];
    let mut sum2 = vec![0.0; cells];
    for (a, b) in &partials {
        for c in 0..cells {
            sum[c] += a[c];
            sum2[c] += b[c];
        }
    }
    let n = cfg.paths as f64;
    let mut rows = Vec::with_capacity(cells);
    for (si, &e) in ends.iter().enumerate() {
        for (pi, &p) in cfg.powers.iter().enumerate() {
            let c = si * cfg.powers.len() + pi;
            let mean = sum[c] / n;
            let var = ((sum2[c] - n * mean * mean) / (n - 1.0)).max(0.0);
            rows.push(ScalingRow { span: e as f64 * dt, p, moment: mean, stderr: (var / n).sqrt() });
        }
    }
    let slopes = cfg
        .powers
        .iter()
        .map(|&p| {
            let sel: Vec<&ScalingRow> = rows.iter().filter(|r| r.p == p).collect();
            let x: Vec<f64> = sel.iter().map(|r| r.span).collect();
            let y: Vec<f64> = sel.iter().map(|r| r.moment).collect();
            fit_loglog(&x, &y).map(|f| (p, f))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingReport { rows, slopes })
}
