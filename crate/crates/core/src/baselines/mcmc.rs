//! MCMC maximum likelihood: damped Newton iteration on the moment condition
//! S(g_obs) = E_θ[S(W)], with the expectation and curvature estimated from
//! sampled networks at the current parameter.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bilevel::{EstimationResult, RunFlags, TraceRow};
use crate::sampler::{self, SamplerConfig};
use crate::seeding::{derive_seed, purpose};
use crate::stats::{self, Graph, Theta};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcMleConfig {
    /// Proposals discarded before retaining samples, per Newton iteration.
    pub burn_in: u64,
    /// Proposals between retained samples.
    pub thinning: u64,
    /// Retained samples per Newton iteration.
    pub samples_m: usize,
    /// Newton damping factor a in θ ← θ + a·Cov⁻¹ score.
    pub step_a: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Stabilizer added to the sample covariance before solving.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for McmcMleConfig {
    fn default() -> Self {
        Self {
            burn_in: 50_000,
            thinning: 1_000,
            samples_m: 300,
            step_a: 0.5,
            tol: 1e-4,
            max_iter: 30,
            ridge: 1e-8,
            seed: 0,
        }
    }
}

impl McmcMleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_m < 2 {
            return Err(Error::Config("samples_m must be >= 2 for a covariance".into()));
        }
        if !(self.step_a > 0.0) {
            return Err(Error::Config("step_a must be > 0".into()));
        }
        Ok(())
    }
}

/// One damped Newton update on the moment condition. The log-likelihood
/// Hessian is -Cov_θ(S), so the ascent step solves the covariance system:
/// Δθ = a (Cov + ridge·I)⁻¹ (S(g) - mean S). A zero score moves nothing.
pub fn newton_moment_step(
    score: &[f64],
    cov: &DMatrix<f64>,
    step_a: f64,
    ridge: f64,
) -> Result<Vec<f64>> {
    let d = score.len();
    let mut stabilized = cov.clone();
    for a in 0..d {
        stabilized[(a, a)] += ridge;
    }
    let rhs = DVector::from_column_slice(score);
    let dir = stabilized
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("sample covariance is singular even after ridge".into()))?;
    Ok(dir.iter().map(|v| step_a * v).collect())
}

fn sample_moments(samples: &[Graph], theta: &Theta) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = theta.dim();
    let m = samples.len();
    let mut stats_rows = Vec::with_capacity(m);
    for g in samples {
        stats_rows.push(stats::stats_vector(g, &theta.spec)?.values);
    }
    let mut mean = vec![0.0; d];
    for row in &stats_rows {
        for (m_a, v) in mean.iter_mut().zip(row) {
            *m_a += v;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in &stats_rows {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    cov /= (m - 1) as f64;
    Ok((mean, cov))
}

/// Iterate: sample M thinned networks at θ_t, form the score
/// S(g_obs) - mean S(W), take a damped Newton step, stop on a small move or
/// the iteration cap. Degenerate sampling (mass on near-empty/near-complete
/// graphs) is flagged, not fatal.
pub fn mcmc_mle_estimate(g: &Graph, theta0: &Theta, cfg: &McmcMleConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    let started = Instant::now();
    let n = g.n();
    let obs = stats::stats_vector(g, &theta0.spec)?;
    let mut theta = theta0.values.clone();
    let mut flags = RunFlags::default();
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut termination = "max_iterations".to_string();

    for t in 0..cfg.max_iter {
        let theta_t = Theta::new(theta.clone(), theta0.spec.clone())?;
        let chain = SamplerConfig {
            burn_in: cfg.burn_in,
            thinning: cfg.thinning,
            count: cfg.samples_m,
            init_p: g.density(),
            seed: derive_seed(cfg.seed, t as u64, purpose::MCMC_CHAIN),
            proposal: sampler::ProposalRule::Metropolis,
        };
        let samples = sampler::metropolis_sample(n, &theta_t, &chain)?;
        let report = sampler::degeneracy_report(&samples)?;
        if report.extreme_fraction > 0.95 {
            flags.degenerate_sampling = true;
            flags.messages.push(format!(
                "degenerate sampling at t={t}: extreme fraction {:.3}",
                report.extreme_fraction
            ));
        }
        let (mean, cov) = sample_moments(&samples, &theta_t)?;
        let score: Vec<f64> = obs.values.iter().zip(&mean).map(|(o, m)| o - m).collect();
        let score_norm_sq: f64 = score.iter().map(|v| v * v).sum();

        let delta = match newton_moment_step(&score, &cov, cfg.step_a, cfg.ridge) {
            Ok(delta) => delta,
            Err(_) => {
                // escalate the ridge once before giving up
                flags.messages.push(format!("covariance near-singular at t={t}; ridge escalated"));
                newton_moment_step(&score, &cov, cfg.step_a, cfg.ridge * 1e6)?
            }
        };
        let move_norm: f64 = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        trace.push(TraceRow {
            t,
            theta: theta.clone(),
            f_value: score_norm_sq,
            q_hat: 0.0,
            lambda: 0.0,
            delta_norm_sq: move_norm * move_norm,
            stationarity: score_norm_sq,
            energy: score_norm_sq,
            elapsed_s: started.elapsed().as_secs_f64(),
        });
        for (v, d) in theta.iter_mut().zip(&delta) {
            *v += d;
        }
        if !theta.iter().all(|v| v.is_finite()) {
            flags.nonfinite = true;
            termination = format!("non-finite parameters at t={t}");
            break;
        }
        if move_norm < cfg.tol {
            termination = "converged".into();
            break;
        }
    }

    Ok(EstimationResult {
        method: "mcmc_mle".into(),
        theta_hat: theta,
        mu_final: None,
        iterations: trace.len(),
        termination,
        std_errors: None,
        runtime_s: started.elapsed().as_secs_f64(),
        inner_iterations: Vec::new(),
        trace,
        flags,
    })
}
