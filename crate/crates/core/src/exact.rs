//! Brute-force enumeration over all graphs on up to six nodes: exact
//! log-normalizing constant, exact likelihoods, and exact statistic
//! expectations. Ground truth for the approximate machinery.
//!
//! Graphs are indexed by a binary counter over the upper triangle in
//! row-major order: bit b of the index toggles the b-th pair in the sequence
//! (0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1). Regression constants
//! depend on this order.

use crate::stats::{self, Graph, StatsVector, Theta};
use crate::{Error, Result};

/// Largest node count the oracle accepts (2^15 graphs at n = 6).
pub const MAX_NODES: usize = 6;

/// Fully enumerated ERGM on a tiny node set.
#[derive(Debug, Clone)]
pub struct ExactModel {
    n: usize,
    /// Statistics of every graph, indexed by the upper-triangle counter.
    stats: Vec<StatsVector>,
    /// log Pr(graph) for every graph.
    log_probs: Vec<f64>,
    /// Scaled log-normalizing constant ψ = log Z / n².
    psi: f64,
}

pub fn pair_order(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Index of a graph under the documented upper-triangle bit order.
pub fn graph_index(g: &Graph) -> usize {
    let mut idx = 0usize;
    for (b, (i, j)) in pair_order(g.n()).into_iter().enumerate() {
        if g.has_edge(i, j) {
            idx |= 1 << b;
        }
    }
    idx
}

impl ExactModel {
    pub fn build(theta: &Theta, n: usize) -> Result<Self> {
        if n > MAX_NODES {
            return Err(Error::Config(format!(
                "exact enumeration is capped at n = {MAX_NODES}, got n = {n}"
            )));
        }
        if n < 2 {
            return Err(Error::Config("exact enumeration needs n >= 2".into()));
        }
        let pairs = pair_order(n);
        let count = 1usize << pairs.len();
        let mut all_stats = Vec::with_capacity(count);
        let mut potentials = Vec::with_capacity(count);
        let mut g = Graph::empty(n);
        for mask in 0..count {
            for (b, &(i, j)) in pairs.iter().enumerate() {
                g.set_dyad(i, j, mask & (1 << b) != 0);
            }
            let s = stats::stats_vector(&g, &theta.spec)?;
            potentials.push(s.dot(&theta.values));
            all_stats.push(s);
        }
        let max_q = potentials.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max_q + potentials.iter().map(|q| (q - max_q).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = potentials.iter().map(|q| q - log_z).collect();
        let nf = n as f64;
        Ok(Self { n, stats: all_stats, log_probs, psi: log_z / (nf * nf) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn graph_count(&self) -> usize {
        self.log_probs.len()
    }

    /// ψ(θ) = n⁻² log Σ_w exp Q(θ|w).
    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs.iter().map(|lp| lp.exp()).collect()
    }

    pub fn log_prob_of(&self, g: &Graph) -> f64 {
        self.log_probs[graph_index(g)]
    }

    /// Probability-weighted mean of the statistics vector.
    pub fn mean_stats(&self) -> StatsVector {
        let d = self.stats[0].values.len();
        let mut mean = vec![0.0; d];
        for (s, lp) in self.stats.iter().zip(&self.log_probs) {
            let p = lp.exp();
            for (m, v) in mean.iter_mut().zip(&s.values) {
                *m += p * v;
            }
        }
        StatsVector { values: mean }
    }
}

/// Exact scaled log-normalizing constant for tiny n.
pub fn exact_psi(theta: &Theta, n: usize) -> Result<f64> {
    Ok(ExactModel::build(theta, n)?.psi())
}

/// Exact expectation of the statistics vector under the model.
pub fn exact_mean_stats(theta: &Theta, n: usize) -> Result<StatsVector> {
    Ok(ExactModel::build(theta, n)?.mean_stats())
}

/// Exact scaled log-likelihood l(θ|g) = T(θ|g)/n² - ψ(θ).
pub fn exact_loglik(theta: &Theta, g: &Graph) -> Result<f64> {
    let psi = exact_psi(theta, g.n())?;
    Ok(stats::scaled_potential(theta, g)? - psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ModelSpec;

    #[test]
    fn psi_two_nodes_edge_only() {
        for &t1 in &[-2.0, -1.0, 0.0, 0.7, 1.3] {
            let theta = Theta::new(vec![t1], ModelSpec::edges_only()).unwrap();
            let psi = exact_psi(&theta, 2).unwrap();
            let want = 0.25 * (1.0 + (2.0 * t1).exp()).ln();
            assert!((psi - want).abs() < 1e-12, "t1={t1}");
        }
    }

    #[test]
    fn psi_at_zero_counts_graphs() {
        for n in 2..=5 {
            let theta = Theta::new(vec![0.0, 0.0], ModelSpec::edge_triangle()).unwrap();
            let psi = exact_psi(&theta, n).unwrap();
            let pairs = (n * (n - 1) / 2) as f64;
            let want = pairs * std::f64::consts::LN_2 / (n * n) as f64;
            assert!((psi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_normalize() {
        let theta = Theta::new(vec![-1.0, 1.0], ModelSpec::edge_triangle()).unwrap();
        let model = ExactModel::build(&theta, 4).unwrap();
        let total: f64 = model.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(model.graph_count(), 64);
    }

    #[test]
    fn mean_stats_at_zero_theta() {
        let theta = Theta::new(vec![0.0, 0.0], ModelSpec::edge_triangle()).unwrap();
        for n in 3..=5 {
            let mean = exact_mean_stats(&theta, n).unwrap();
            // each ordered pair is present with probability 1/2
            let want_edges = (n * (n - 1)) as f64 * 0.5;
            assert!((mean.values[0] - want_edges).abs() < 1e-10);
        }
    }

    #[test]
    fn mean_stats_vanish_for_very_negative_edges() {
        let theta = Theta::new(vec![-30.0, 0.0], ModelSpec::edge_triangle()).unwrap();
        let mean = exact_mean_stats(&theta, 4).unwrap();
        assert!(mean.values[0].abs() < 1e-10);
        assert!(mean.values[1].abs() < 1e-10);
    }

    #[test]
    fn likelihoods_normalize_over_graphs() {
        let theta = Theta::new(vec![-0.5, 0.8], ModelSpec::edge_triangle()).unwrap();
        let n = 4usize;
        let pairs = pair_order(n);
        let mut total = 0.0;
        let mut g = Graph::empty(n);
        for mask in 0..(1usize << pairs.len()) {
            for (b, &(i, j)) in pairs.iter().enumerate() {
                g.set_dyad(i, j, mask & (1 << b) != 0);
            }
            total += ((n * n) as f64 * exact_loglik(&theta, &g).unwrap()).exp();
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn grid_mle_moment_matches() {
        // synthetic observed graph on 4 nodes; the grid argmax of the exact
        // likelihood should make model means match observed statistics
        let spec = ModelSpec::edge_triangle();
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let obs = stats::stats_vector(&g, &spec).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let steps = 61;
        for a in 0..steps {
            for b in 0..steps {
                let t1 = -3.0 + 6.0 * a as f64 / (steps - 1) as f64;
                let t2 = -3.0 + 6.0 * b as f64 / (steps - 1) as f64;
                let theta = Theta::new(vec![t1, t2], spec.clone()).unwrap();
                let ll = exact_loglik(&theta, &g).unwrap();
                if ll > best.0 {
                    best = (ll, t1, t2);
                }
            }
        }
        let theta_hat = Theta::new(vec![best.1, best.2], spec).unwrap();
        let mean = exact_mean_stats(&theta_hat, 4).unwrap();
        // coarse grid: moment matching holds to grid resolution
        assert!((mean.values[0] - obs.values[0]).abs() < 0.6);
        assert!((mean.values[1] - obs.values[1]).abs() < 0.2);
    }

    #[test]
    fn oversized_n_refused() {
        let theta = Theta::new(vec![0.0, 0.0], ModelSpec::edge_triangle()).unwrap();
        assert!(exact_psi(&theta, 7).is_err());
    }
}
