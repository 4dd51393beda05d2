//! Command-line front end: configuration, experiment orchestration and CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_price, cmd_simulate, cmd_study, StudyKind};
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qgfbsde", version, about = "Quadratic FBSDE engine: indifference pricing and convergence studies")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides seed.master).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated correlations; the first also becomes market.rho.
    #[arg(long, global = true, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// picard-lsmc or one-pass-backward.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Comma-separated truncation levels.
    #[arg(long, global = true, value_delimiter = ',')]
    pub levels: Option<Vec<u32>>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index and asset sample paths.
    Simulate,
    /// Price sweeps and the price / strategy processes.
    Price,
    /// Convergence studies.
    Study {
        #[arg(value_enum)]
        which: StudyKind,
    },
}

impl Cli {
    /// Loads the configuration file and applies flag overrides.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed.master = s;
        }
        if let Some(r) = &self.rho {
            if r.is_empty() {
                return Err(CliError::Config("--rho needs at least one value".into()));
            }
            cfg.sweep.rhos = r.clone();
            cfg.market.rho = r[0];
        }
        if let Some(s) = &self.scheme {
            cfg.numerics.scheme = s.parse()?;
        }
        if let Some(l) = &self.levels {
            cfg.study.truncation_levels = l.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the parsed command and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = cli.resolve()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Price => cmd_price(&cfg),
        Command::Study { which } => cmd_study(&cfg, *which),
    })
}
