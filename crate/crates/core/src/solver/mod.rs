//! Backward least-squares Monte Carlo for decoupled FBSDEs with Lipschitz drivers.

mod basis;
mod lsmc;
mod regression;

pub use basis::RegressionBasis;
pub use lsmc::{solve_lipschitz, solve_truncated, BsdeSolution, StepFit};
pub use regression::{regress, RegressionFit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Full backward sweeps on frozen previous-sweep values until `Y_0` settles.
    #[default]
    PicardLsmc,
    /// Single explicit sweep using the freshly fitted `Y_{t_{i+1}}`.
    OnePassBackward,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "picard-lsmc" => Ok(Scheme::PicardLsmc),
            "one-pass-backward" => Ok(Scheme::OnePassBackward),
            other => Err(Error::config(format!(
                "unknown scheme `{other}` (expected picard-lsmc or one-pass-backward)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub scheme: Scheme,
    pub basis: RegressionBasis,
}

impl SolverConfig {
    pub fn new(basis: RegressionBasis) -> Self {
        SolverConfig {
            tolerance: 1e-5,
            max_iterations: 30,
            scheme: Scheme::PicardLsmc,
            basis,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::config(format!("Picard tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}
