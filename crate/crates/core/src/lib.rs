//! Estimation toolkit for exponential random graph models (ERGM).
//!
//! The centerpiece is a bilevel maximum-likelihood estimator that replaces the
//! intractable log-normalizing constant with a regularized mean-field
//! surrogate and steers the joint parameter/surrogate update with a dynamic
//! barrier. Alongside it: three reference estimators (fixed-point mean-field,
//! maximum pseudo-likelihood, and MCMC moment matching), a Metropolis network
//! sampler, an exact enumeration oracle for tiny graphs, and a seeded Monte
//! Carlo replication harness.

pub mod baselines;
pub mod bilevel;
mod error;
pub mod exact;
pub mod gradcheck;
pub mod io;
pub mod meanfield;
pub mod montecarlo;
pub mod sampler;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
