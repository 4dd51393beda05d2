//! Numerical engine for forward-backward SDEs with quadratic-growth drivers.
//!
//! The pieces compose as follows: [`market`] simulates the forward index,
//! [`drivers`] builds quadratic drivers together with their truncations and the
//! exponential transform, [`solver`] runs backward least-squares Monte Carlo on a
//! [`PathBatch`], and [`pricing`] assembles utility indifference prices and hedges.
//! [`studies`] measures convergence rates empirically.

pub mod analytic;
pub mod drivers;
pub mod error;
pub mod grid;
pub mod market;
pub mod parallel;
pub mod paths;
pub mod payoff;
pub mod pricing;
pub mod rng;
pub mod solver;
pub mod studies;
pub mod validate;

pub use drivers::{
    cole_hopf_forward, cole_hopf_inverse, eval_quadratic, transformed_driver, truncate_scalar,
    truncated_driver, utility_driver, Driver, LipschitzDriver, QuadraticDriverSpec, TruncationLevel,
};
pub use error::{Error, Result};
pub use grid::{build_grid, TimeGrid};
pub use market::{simulate_asset, simulate_index, theta, GeometricParams, MarketModel, Stepping};
pub use paths::{draw_increments, Increments, PathBatch};
pub use payoff::{PayoffKind, PayoffSpec};
pub use pricing::{distortion_oracle, optimal_strategy, price_indifference, PriceReport};
pub use rng::SeedSpec;
pub use solver::{
    regress, solve_lipschitz, solve_truncated, BsdeSolution, RegressionBasis, Scheme, SolverConfig,
};
pub use validate::Lattice;
