//! Reference estimators the bilevel method is benchmarked against:
//! the fixed-point mean-field estimator, maximum pseudo-likelihood, and
//! MCMC moment matching. All three share [`crate::bilevel::EstimationResult`].

mod mcmc;
mod mple;
mod mz;

pub use mcmc::{mcmc_mle_estimate, newton_moment_step, McmcMleConfig};
pub use mple::{mple_estimate, MpleConfig};
pub use mz::{
    mz_estimate, mz_fixed_point_inner, mz_multistart_psi, FixedPointStop, MzConfig, MzInnerOutcome,
};

/// Change statistics are shared with the sampler; re-exported here because
/// they are the pseudo-likelihood design matrix.
pub use crate::stats::change_stats;
