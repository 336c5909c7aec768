//! Maximum pseudo-likelihood: logistic regression of dyad states on change
//! statistics, fit by ridge-stabilized Newton with backtracking.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bilevel::{EstimationResult, RunFlags, TraceRow};
use crate::stats::{self, Graph, Theta};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpleConfig {
    pub newton_max_iter: usize,
    pub newton_tol: f64,
    /// Tiny Hessian stabilizer; dyad designs with constant columns are
    /// singular for edge-only specs at extreme densities.
    pub ridge: f64,
}

impl Default for MpleConfig {
    fn default() -> Self {
        Self { newton_max_iter: 100, newton_tol: 1e-10, ridge: 1e-10 }
    }
}

fn log1p_exp(z: f64) -> f64 {
    // stable ln(1 + e^z)
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Pseudo-log-likelihood Σ_{i<j} [y z - ln(1+e^z)] with z = ⟨θ, δ_ij⟩.
fn pseudo_loglik(theta: &[f64], rows: &[(f64, Vec<f64>)]) -> f64 {
    rows.iter()
        .map(|(y, x)| {
            let z: f64 = theta.iter().zip(x).map(|(t, v)| t * v).sum();
            y * z - log1p_exp(z)
        })
        .sum()
}

/// Fit θ by Newton ascent on the pseudo-likelihood over all dyads i < j.
/// Standard errors come from the inverse Fisher information; they are known
/// to understate uncertainty for dependent networks and are flagged as such.
pub fn mple_estimate(g: &Graph, theta0: &Theta, cfg: &MpleConfig) -> Result<EstimationResult> {
    let started = Instant::now();
    let n = g.n();
    if n < 2 {
        return Err(Error::Config("pseudo-likelihood needs n >= 2".into()));
    }
    let d = theta0.dim();
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = stats::change_stats(g, i, j, &theta0.spec)?;
            rows.push((f64::from(u8::from(g.has_edge(i, j))), delta.values));
        }
    }

    let mut flags = RunFlags::default();
    let ones = rows.iter().filter(|(y, _)| *y == 1.0).count();
    if ones == 0 || ones == rows.len() {
        flags.separation = true;
        flags.messages.push("separation: all dyad responses identical".into());
    }

    let mut theta = theta0.values.clone();
    let mut ll = pseudo_loglik(&theta, &rows);
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut termination = "max_iterations".to_string();
    let mut fisher = DMatrix::<f64>::zeros(d, d);

    for t in 0..cfg.newton_max_iter {
        let mut grad = DVector::<f64>::zeros(d);
        fisher.fill(0.0);
        for (y, x) in &rows {
            let z: f64 = theta.iter().zip(x).map(|(t, v)| t * v).sum();
            let p = crate::sampler::sigmoid(z);
            for a in 0..d {
                grad[a] += (y - p) * x[a];
                for b in 0..d {
                    fisher[(a, b)] += p * (1.0 - p) * x[a] * x[b];
                }
            }
        }
        let grad_norm_sq = grad.norm_squared();
        trace.push(TraceRow {
            t,
            theta: theta.clone(),
            f_value: -ll,
            q_hat: 0.0,
            lambda: 0.0,
            delta_norm_sq: grad_norm_sq,
            stationarity: grad_norm_sq,
            energy: -ll,
            elapsed_s: started.elapsed().as_secs_f64(),
        });
        if grad.amax() < cfg.newton_tol {
            termination = "converged".into();
            break;
        }
        let mut stabilized = fisher.clone();
        for a in 0..d {
            stabilized[(a, a)] += cfg.ridge;
        }
        let dir = match stabilized.lu().solve(&grad) {
            Some(dir) => dir,
            None => {
                flags.messages.push("singular Fisher information".into());
                termination = "singular information matrix".into();
                break;
            }
        };
        // backtracking keeps the ascent monotone
        let mut step = 1.0;
        let mut advanced = false;
        for _ in 0..50 {
            let cand: Vec<f64> = theta.iter().zip(dir.iter()).map(|(v, s)| v + step * s).collect();
            let cand_ll = pseudo_loglik(&cand, &rows);
            if cand_ll >= ll {
                theta = cand;
                ll = cand_ll;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            termination = "line search exhausted".into();
            break;
        }
        if theta.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e4 {
            flags.separation = true;
            flags.messages.push("separation: diverging coefficients".into());
            termination = "diverging coefficients".into();
            break;
        }
    }

    // Fisher-information standard errors at the final iterate
    let mut stabilized = fisher.clone();
    for a in 0..d {
        stabilized[(a, a)] += cfg.ridge;
    }
    let std_errors = stabilized
        .lu()
        .try_inverse()
        .map(|inv| (0..d).map(|a| inv[(a, a)].max(0.0).sqrt()).collect::<Vec<f64>>());
    flags
        .messages
        .push("standard errors from inverse Fisher information; biased under dependence".into());

    Ok(EstimationResult {
        method: "mple".into(),
        theta_hat: theta,
        mu_final: None,
        iterations: trace.len(),
        termination,
        std_errors,
        runtime_s: started.elapsed().as_secs_f64(),
        inner_iterations: Vec::new(),
        trace,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ModelSpec;

    #[test]
    fn edge_only_closed_form() {
        // constant covariate 2 per dyad: θ̂₁ = logit(density)/2
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 5)]).unwrap();
        let theta0 = Theta::new(vec![0.0], ModelSpec::edges_only()).unwrap();
        let fit = mple_estimate(&g, &theta0, &MpleConfig::default()).unwrap();
        let density = g.density();
        let want = (density / (1.0 - density)).ln() / 2.0;
        assert!((fit.theta_hat[0] - want).abs() < 1e-8, "got {}", fit.theta_hat[0]);
        assert_eq!(fit.termination, "converged");
        assert!(fit.std_errors.is_some());
    }

    #[test]
    fn empty_graph_flags_separation() {
        let g = Graph::empty(5);
        let theta0 = Theta::new(vec![0.0, 0.0], ModelSpec::edge_triangle()).unwrap();
        let fit = mple_estimate(&g, &theta0, &MpleConfig::default()).unwrap();
        assert!(fit.flags.separation);
    }

    #[test]
    fn newton_is_monotone() {
        let g = Graph::from_edges(7, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 6)])
            .unwrap();
        let theta0 = Theta::new(vec![-2.0, 2.0], ModelSpec::edge_triangle()).unwrap();
        let fit = mple_estimate(&g, &theta0, &MpleConfig::default()).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1].f_value <= w[0].f_value + 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_at_fit() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (0, 3)]).unwrap();
        let spec = ModelSpec::edge_triangle();
        let theta0 = Theta::new(vec![0.0, 0.0], spec.clone()).unwrap();
        let fit = mple_estimate(&g, &theta0, &MpleConfig::default()).unwrap();
        // recompute the score at θ̂
        let mut grad = vec![0.0; 2];
        for i in 0..6 {
            for j in (i + 1)..6 {
                let x = stats::change_stats(&g, i, j, &spec).unwrap();
                let y = f64::from(u8::from(g.has_edge(i, j)));
                let z: f64 = fit.theta_hat.iter().zip(&x.values).map(|(t, v)| t * v).sum();
                let p = crate::sampler::sigmoid(z);
                for a in 0..2 {
                    grad[a] += (y - p) * x.values[a];
                }
            }
        }
        for v in grad {
            assert!(v.abs() < 1e-8);
        }
    }
}
