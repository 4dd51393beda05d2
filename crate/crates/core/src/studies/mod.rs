//! Empirical convergence-rate studies: path regularity of `Z`, truncation error
//! decay, and moment scaling of the forward SDE.

mod fit;
mod regularity;
mod scaling;
mod truncation;

pub use fit::{fit_loglog, SlopeFit};
pub use regularity::{
    regularity_statistic, regularity_study, smooth_digital, zbar, ConditionalMean, RegularityConfig,
    RegularityMode, RegularityReport, RegularityRow, SmoothDigital,
};
pub use scaling::{sde_scaling_study, ScalingConfig, ScalingReport, ScalingRow};
pub use truncation::{truncation_study, TruncationReport, TruncationRow};
