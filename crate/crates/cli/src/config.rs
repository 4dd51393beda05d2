//! Run configuration: one TOML file with sections, every key optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qgfbsde_core::market::Stepping;
use qgfbsde_core::studies::RegularityMode;
use qgfbsde_core::{GeometricParams, MarketModel, PayoffSpec, RegressionBasis, Scheme, SolverConfig};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketConfig,
    pub payoff: PayoffConfig,
    pub numerics: NumericsConfig,
    pub sweep: SweepConfig,
    pub study: StudyConfig,
    pub seed: SeedConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub r0: f64,
    pub s0: f64,
    pub eta: f64,
    pub horizon: f64,
    pub stepping: Stepping,
}

impl Default for MarketConfig {
    fn default() -> Self {
        let p = GeometricParams::default();
        MarketConfig {
            mu: p.mu,
            sigma: p.sigma,
            alpha: p.alpha,
            beta: p.beta,
            rho: p.rho,
            r0: p.r0,
            s0: p.s0,
            eta: p.eta,
            horizon: p.horizon,
            stepping: Stepping::Exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffKindName {
    Put,
    Call,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffConfig {
    pub kind: PayoffKindName,
    pub strike: f64,
    pub cap: Option<f64>,
    pub scale: f64,
    /// `[[x, value], ...]` for `kind = "table"`.
    pub points: Vec<(f64, f64)>,
}

impl Default for PayoffConfig {
    fn default() -> Self {
        PayoffConfig { kind: PayoffKindName::Put, strike: 200.0, cap: None, scale: 1.0, points: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub steps: usize,
    pub paths: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub degrees: Vec<u32>,
    /// Append the payoff to the monomial basis.
    pub payoff_in_basis: bool,
    pub scheme: Scheme,
    pub oracle_paths: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            steps: 100,
            paths: 70_000,
            tolerance: 1e-5,
            max_iterations: 30,
            degrees: (0..=4).collect(),
            payoff_in_basis: true,
            scheme: Scheme::PicardLsmc,
            oracle_paths: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub rhos: Vec<f64>,
    pub strikes: Vec<f64>,
    pub spots: Vec<f64>,
    /// Strike of the spot sweep.
    pub spot_strike: f64,
    /// Strike of the price and strategy paths.
    pub path_strike: f64,
    /// Paths written by `simulate`.
    pub simulate_paths: usize,
    /// Path index reported as the sample path.
    pub sample_path: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rhos: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            strikes: (0..7).map(|k| 160.0 + 10.0 * k as f64).collect(),
            spots: (0..7).map(|k| 150.0 + 10.0 * k as f64).collect(),
            spot_strike: 200.0,
            path_strike: 180.0,
            simulate_paths: 5,
            sample_path: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub refinements: Vec<usize>,
    pub regularity_paths: usize,
    pub fine_factor: usize,
    pub regularity_mode: RegularityMode,
    pub digital_amplitude: f64,
    pub digital_width: f64,
    pub slope_range: (f64, f64),
    pub truncation_levels: Vec<u32>,
    /// Multiplies the payoff in the truncation study.
    pub truncation_payoff_scale: f64,
    pub scaling_spans: Vec<f64>,
    pub scaling_powers: Vec<u32>,
    pub scaling_paths: usize,
    pub scaling_substeps: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            refinements: vec![25, 50, 100, 200],
            regularity_paths: 20_000,
            fine_factor: 8,
            regularity_mode: RegularityMode::Analytic,
            digital_amplitude: 1.0,
            digital_width: 0.25,
            slope_range: (0.8, 1.2),
            truncation_levels: vec![1, 2, 4, 8],
            truncation_payoff_scale: 0.1,
            scaling_spans: vec![0.01, 0.02, 0.04, 0.08],
            scaling_powers: vec![2, 4],
            scaling_paths: 70_000,
            scaling_substeps: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub master: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig { master: 20_240_601 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the resolved configuration, excluding the output directory (which does
    /// not affect any result).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig { dir: PathBuf::new() };
        let text = toml::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn params(&self) -> GeometricParams {
        let m = &self.market;
        GeometricParams {
            mu: m.mu,
            sigma: m.sigma,
            alpha: m.alpha,
            beta: m.beta,
            rho: m.rho,
            r0: m.r0,
            s0: m.s0,
            eta: m.eta,
            horizon: m.horizon,
        }
    }

    pub fn model(&self) -> MarketModel {
        MarketModel { stepping: self.market.stepping, ..MarketModel::geometric(&self.params()) }
    }

    /// The configured payoff, with `strike` replaced when given.
    pub fn payoff(&self, strike: Option<f64>) -> Result<PayoffSpec, CliError> {
        let p = &self.payoff;
        let k = strike.unwrap_or(p.strike);
        let spec = match p.kind {
            PayoffKindName::Put => match p.cap {
                Some(c) => PayoffSpec::put(k)?.with_cap(c)?,
                None => PayoffSpec::put(k)?,
            },
            PayoffKindName::Call => PayoffSpec::call(k, p.cap)?,
            PayoffKindName::Table => PayoffSpec::table(p.points.clone())?,
        };
        Ok(spec.scaled(p.scale)?)
    }

    pub fn solver(&self, payoff: &PayoffSpec) -> Result<SolverConfig, CliError> {
        let n = &self.numerics;
        let mut basis = RegressionBasis::monomials(n.degrees.iter().copied())?;
        if n.payoff_in_basis {
            basis = basis.with_payoff(payoff);
        }
        let cfg = SolverConfig { tolerance: n.tolerance, max_iterations: n.max_iterations, scheme: n.scheme, basis };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked before any simulation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model();
        let lattice = model.default_lattice()?;
        model.validate(&lattice, qgfbsde_core::pricing::ELLIPTICITY_EPS)?;
        for rho in &self.sweep.rhos {
            model.with_rho(*rho).validate(&lattice, qgfbsde_core::pricing::ELLIPTICITY_EPS)?;
        }
        for r0 in &self.sweep.spots {
            model.with_spot(*r0).validate(&lattice, qgfbsde_core::pricing::ELLIPTICITY_EPS)?;
        }
        let payoff = self.payoff(None)?;
        payoff.validate(&lattice)?;
        if self.payoff.kind != PayoffKindName::Table {
            for k in self.sweep.strikes.iter().chain([&self.sweep.spot_strike, &self.sweep.path_strike]) {
                self.payoff(Some(*k))?;
            }
        }
        let solver = self.solver(&payoff)?;
        let n = &self.numerics;
        if n.steps == 0 {
            return Err(CliError::Config("numerics.steps must be at least 1".into()));
        }
        if n.paths < solver.basis.len() {
            return Err(CliError::Config(format!(
                "numerics.paths = {} is smaller than the basis size {}",
                n.paths,
                solver.basis.len()
            )));
        }
        if n.oracle_paths < 2 {
            return Err(CliError::Config("numerics.oracle_paths must be at least 2".into()));
        }
        if self.sweep.rhos.is_empty() {
            return Err(CliError::Config("sweep.rhos must not be empty".into()));
        }
        let s = &self.study;
        if !(s.truncation_payoff_scale.is_finite() && s.truncation_payoff_scale > 0.0) {
            return Err(CliError::Config("study.truncation_payoff_scale must be positive".into()));
        }
        if !(s.slope_range.0 < s.slope_range.1) {
            return Err(CliError::Config("study.slope_range must be an increasing pair".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.numerics.paths, 70_000);
        assert_eq!(c.market.s0, 173.0);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::parse("[market]\nmu = 0.1\nfoo = 1\n"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse("[nope]\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::parse(
            r#"
            [market]
            rho = 0.9
            stepping = "euler"
            [payoff]
            kind = "table"
            points = [[100.0, 1.0], [200.0, 0.0]]
            [numerics]
            scheme = "one-pass-backward"
            degrees = [0, 1, 2]
            "#,
        )
        .unwrap();
        assert_eq!(c.market.rho, 0.9);
        assert_eq!(c.market.stepping, Stepping::Euler);
        assert_eq!(c.numerics.scheme, Scheme::OnePassBackward);
        assert_eq!(c.payoff(None).unwrap().cap(), 1.0);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = RunConfig::default();
        c.market.rho = 1.5;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.payoff.kind = PayoffKindName::Call;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.numerics.paths = 3;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed.master += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
