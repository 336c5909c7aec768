//! Network generation by single-dyad Metropolis toggling with burn-in and
//! thinning, plus Erdős–Rényi initialization and a degeneracy report.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::{self, Graph, Theta};
use crate::{Error, Result};

/// How a proposed dyad is resampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalRule {
    /// Flip the dyad, accept with min(1, exp(ΔQ)).
    Metropolis,
    /// Draw the dyad from its full conditional σ(⟨θ, δ⟩). Untested against
    /// the reference protocol; kept behind this flag.
    Gibbs,
}

/// Chain tuning: counts are in single-dyad proposals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub burn_in: u64,
    pub thinning: u64,
    /// Number of retained samples.
    pub count: usize,
    /// Erdős–Rényi initialization probability.
    pub init_p: f64,
    pub seed: u64,
    #[serde(default = "default_proposal")]
    pub proposal: ProposalRule,
}

fn default_proposal() -> ProposalRule {
    ProposalRule::Metropolis
}

impl SamplerConfig {
    /// Desk-scale defaults: burn-in 10⁵·n, thinning 10·n.
    pub fn desk_scale(n: usize, init_p: f64, seed: u64) -> Self {
        Self {
            burn_in: 100_000 * n as u64,
            thinning: 10 * n as u64,
            count: 1,
            init_p,
            seed,
            proposal: ProposalRule::Metropolis,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.init_p) {
            return Err(Error::Config(format!("init_p must be in [0,1], got {}", self.init_p)));
        }
        Ok(())
    }
}

/// Logistic sigmoid, used for the default initialization density exp(θ₁)/(1+exp(θ₁)).
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Erdős–Rényi draw: each unordered dyad present independently with probability p.
pub fn er_init<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                g.set_dyad(i, j, true);
            }
        }
    }
    g
}

/// Potential change Q(θ | g with dyad (i,j) flipped) - Q(θ | g), computed
/// incrementally from change statistics.
pub fn toggle_delta(g: &Graph, i: usize, j: usize, theta: &Theta) -> Result<f64> {
    let delta = stats::change_stats(g, i, j, &theta.spec)?;
    let signed = delta.dot(&theta.values);
    Ok(if g.has_edge(i, j) { -signed } else { signed })
}

/// Run one chain and retain `count` states: uniform random dyad proposal,
/// Metropolis acceptance on the unscaled potential, every `thinning`-th state
/// kept after `burn_in` proposals. Deterministic per seed.
pub fn metropolis_sample(n: usize, theta: &Theta, cfg: &SamplerConfig) -> Result<Vec<Graph>> {
    cfg.validate()?;
    if n < 2 {
        return Err(Error::Config("sampler needs n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut g = er_init(n, cfg.init_p, &mut rng);
    let pairs = crate::exact::pair_order(n);
    let thinning = cfg.thinning.max(1);

    let propose = |g: &mut Graph, rng: &mut ChaCha8Rng| -> Result<()> {
        let (i, j) = pairs[rng.gen_range(0..pairs.len())];
        match cfg.proposal {
            ProposalRule::Metropolis => {
                let dq = toggle_delta(g, i, j, theta)?;
                if dq >= 0.0 || rng.gen::<f64>() < dq.exp() {
                    g.toggle_dyad(i, j);
                }
            }
            ProposalRule::Gibbs => {
                let delta = stats::change_stats(g, i, j, &theta.spec)?;
                let p_on = sigmoid(delta.dot(&theta.values));
                g.set_dyad(i, j, rng.gen::<f64>() < p_on);
            }
        }
        Ok(())
    };

    for _ in 0..cfg.burn_in {
        propose(&mut g, &mut rng)?;
    }
    let mut samples = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        for _ in 0..thinning {
            propose(&mut g, &mut rng)?;
        }
        samples.push(g.clone());
    }
    Ok(samples)
}

/// Summary of how close a sample set sits to the degenerate regimes.
#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub samples: usize,
    /// Fraction with density < 0.05.
    pub near_empty_fraction: f64,
    /// Fraction with density > 0.95.
    pub near_complete_fraction: f64,
    /// near_empty + near_complete.
    pub extreme_fraction: f64,
    pub mean_edges: f64,
    pub var_edges: f64,
    pub mean_triangles: f64,
    pub var_triangles: f64,
}

pub fn degeneracy_report(samples: &[Graph]) -> Result<DegeneracyReport> {
    if samples.is_empty() {
        return Err(Error::Config("degeneracy report needs at least one sample".into()));
    }
    let m = samples.len() as f64;
    let mut near_empty = 0usize;
    let mut near_complete = 0usize;
    let mut edges = Vec::with_capacity(samples.len());
    let mut triangles = Vec::with_capacity(samples.len());
    for g in samples {
        let d = g.density();
        if d < 0.05 {
            near_empty += 1;
        }
        if d > 0.95 {
            near_complete += 1;
        }
        edges.push(stats::stat_edges(g));
        triangles.push(stats::stat_triangles(g));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / m;
    let var = |xs: &[f64], mu: f64| xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m;
    let mean_edges = mean(&edges);
    let mean_triangles = mean(&triangles);
    Ok(DegeneracyReport {
        samples: samples.len(),
        near_empty_fraction: near_empty as f64 / m,
        near_complete_fraction: near_complete as f64 / m,
        extreme_fraction: (near_empty + near_complete) as f64 / m,
        mean_edges,
        var_edges: var(&edges, mean_edges),
        mean_triangles,
        var_triangles: var(&triangles, mean_triangles),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ModelSpec;

    #[test]
    fn er_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g0 = er_init(6, 0.0, &mut rng);
        assert_eq!(g0.edge_count(), 0);
        let g1 = er_init(6, 1.0, &mut rng);
        assert_eq!(g1.edge_count(), 15);
    }

    #[test]
    fn er_edge_count_within_binomial_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let dyads = (n * (n - 1) / 2) as f64;
        let g = er_init(n, 0.5, &mut rng);
        let sd = (dyads * 0.25).sqrt();
        assert!((g.edge_count() as f64 - dyads / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn toggle_delta_edge_only() {
        let spec = ModelSpec::edges_only();
        let theta = Theta::new(vec![-0.7], spec.clone()).unwrap();
        let g = Graph::empty(4);
        let dq = toggle_delta(&g, 0, 1, &theta).unwrap();
        assert!((dq - 2.0 * -0.7).abs() < 1e-15);

        let zero = Theta::new(vec![0.0], spec).unwrap();
        assert_eq!(toggle_delta(&g, 0, 1, &zero).unwrap(), 0.0);
    }

    #[test]
    fn toggle_delta_matches_full_recount() {
        use rand::Rng;
        let spec = ModelSpec::edge_triangle();
        let theta = Theta::new(vec![-1.0, 1.0], spec.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(3..=6);
            let g = er_init(n, 0.5, &mut rng);
            let i = rng.gen_range(0..n);
            let j = (i + 1 + rng.gen_range(0..n - 1)) % n;
            if i == j {
                continue;
            }
            let dq = toggle_delta(&g, i, j, &theta).unwrap();
            let mut flipped = g.clone();
            flipped.toggle_dyad(i, j);
            let brute = stats::potential(&theta, &flipped).unwrap()
                - stats::potential(&theta, &g).unwrap();
            assert!((dq - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_law_at_zero_theta() {
        let theta = Theta::new(vec![0.0, 0.0], ModelSpec::edge_triangle()).unwrap();
        let cfg = SamplerConfig {
            burn_in: 2_000,
            thinning: 20,
            count: 4_000,
            init_p: 0.5,
            seed: 3,
            proposal: ProposalRule::Metropolis,
        };
        let samples = metropolis_sample(4, &theta, &cfg).unwrap();
        let mean_density: f64 =
            samples.iter().map(Graph::density).sum::<f64>() / samples.len() as f64;
        // dyad density is Binomial(6·count, 1/2) up to chain correlation
        assert!((mean_density - 0.5).abs() < 0.02);
    }

    #[test]
    fn seed_determinism() {
        let theta = Theta::new(vec![-1.0, 1.0], ModelSpec::edge_triangle()).unwrap();
        let cfg = SamplerConfig {
            burn_in: 1_000,
            thinning: 10,
            count: 20,
            init_p: 0.3,
            seed: 99,
            proposal: ProposalRule::Metropolis,
        };
        let a = metropolis_sample(5, &theta, &cfg).unwrap();
        let b = metropolis_sample(5, &theta, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degeneracy_report_flags_empty() {
        let samples = vec![Graph::empty(6); 10];
        let report = degeneracy_report(&samples).unwrap();
        assert_eq!(report.near_empty_fraction, 1.0);
        assert_eq!(report.extreme_fraction, 1.0);
        assert_eq!(report.mean_edges, 0.0);

        let theta = Theta::new(vec![0.0, 0.0], ModelSpec::edge_triangle()).unwrap();
        let cfg = SamplerConfig {
            burn_in: 1_000,
            thinning: 10,
            count: 200,
            init_p: 0.5,
            seed: 5,
            proposal: ProposalRule::Metropolis,
        };
        let samples = metropolis_sample(10, &theta, &cfg).unwrap();
        let report = degeneracy_report(&samples).unwrap();
        assert!(report.extreme_fraction < 0.01);
    }

    #[test]
    fn strong_edge_attraction_fills_graph() {
        let theta = Theta::new(vec![2.0, 0.0], ModelSpec::edge_triangle()).unwrap();
        let cfg = SamplerConfig {
            burn_in: 20_000,
            thinning: 50,
            count: 100,
            init_p: 0.5,
            seed: 17,
            proposal: ProposalRule::Metropolis,
        };
        let samples = metropolis_sample(8, &theta, &cfg).unwrap();
        let report = degeneracy_report(&samples).unwrap();
        // σ(2·2) ≈ 0.982 per dyad; mass concentrates near the complete graph
        assert!(report.near_complete_fraction > 0.5);
    }
}
