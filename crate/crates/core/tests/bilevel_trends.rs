//! Trend checks on the bilevel trace: early energy decrease under the
//! joint-step dynamics, and recovery of a negative-transitivity truth.

use ergm_core::bilevel::{self, BarrierForm, MuUpdate, OuterConfig, XiSchedule};
use ergm_core::meanfield::LowerLevelConfig;
use ergm_core::sampler::{self, sigmoid, ProposalRule, SamplerConfig};
use ergm_core::seeding::{derive_seed, purpose};
use ergm_core::stats::{ModelSpec, Theta};

#[test]
fn energy_decreases_over_early_iterations_under_joint_step() {
    let n = 20;
    let truth = Theta::new(vec![-1.0, 1.0], ModelSpec::edge_triangle()).unwrap();
    let chain = SamplerConfig {
        burn_in: 60_000,
        thinning: 200,
        count: 1,
        init_p: sigmoid(-1.0),
        seed: 5,
        proposal: ProposalRule::Metropolis,
    };
    let g = sampler::metropolis_sample(n, &truth, &chain).unwrap().pop().unwrap();
    let cfg = OuterConfig {
        xi: 0.03,
        eta: 0.8,
        t_outer: 400,
        lower: LowerLevelConfig {
            epsilon: 1e-2,
            zeta: 1e-6,
            alpha: 0.002 * (n * n) as f64,
            k_inner: 10,
        },
        theta0: truth.clone(),
        seed: 6,
        gamma: 1.0,
        xi_schedule: XiSchedule::Constant,
        barrier: BarrierForm::GradientNorm,
        mu_update: MuUpdate::JointStep,
    };
    let fit = bilevel::vrbea_estimate(&g, &cfg).unwrap();
    // windowed means of Φ over the early phase, descending as a trend
    let window = 50;
    let mean_phi = |lo: usize| -> f64 {
        fit.trace[lo..lo + window].iter().map(|r| r.energy).sum::<f64>() / window as f64
    };
    let w0 = mean_phi(0);
    let w1 = mean_phi(window);
    let w2 = mean_phi(2 * window);
    assert!(w1 < w0, "energy did not decrease: {w0} -> {w1}");
    assert!(w2 < w1, "energy did not keep decreasing: {w1} -> {w2}");
}

#[test]
fn recovers_negative_transitivity_truth() {
    // same protocol as the main comparison but with truth (-1, -1)
    let n = 50;
    let truth = Theta::new(vec![-1.0, -1.0], ModelSpec::edge_triangle()).unwrap();
    let reps = 4u64;
    let mut mean = [0.0, 0.0];
    for rep in 0..reps {
        let chain = SamplerConfig {
            burn_in: 100_000 * n as u64,
            thinning: 10 * n as u64,
            count: 1,
            init_p: sigmoid(-1.0),
            seed: derive_seed(77, rep, purpose::SAMPLE_NETWORK),
            proposal: ProposalRule::Metropolis,
        };
        let g = sampler::metropolis_sample(n, &truth, &chain).unwrap().pop().unwrap();
        let cfg = OuterConfig {
            xi: 0.03,
            eta: 0.8,
            t_outer: 20_000,
            lower: LowerLevelConfig {
                epsilon: 1e-2,
                zeta: 1e-6,
                alpha: 0.002 * (n * n) as f64,
                k_inner: 10,
            },
            theta0: truth.clone(),
            seed: derive_seed(77, rep, purpose::VRBEA),
            gamma: 1.0,
            xi_schedule: XiSchedule::Constant,
            barrier: BarrierForm::GradientNorm,
            mu_update: MuUpdate::FeedForward,
        };
        let fit = bilevel::vrbea_estimate(&g, &cfg).unwrap();
        mean[0] += fit.theta_hat[0] / reps as f64;
        mean[1] += fit.theta_hat[1] / reps as f64;
    }
    assert!((mean[0] + 1.0).abs() < 0.1, "edge mean {}", mean[0]);
    assert!((mean[1] + 1.0).abs() < 0.1, "triangle mean {}", mean[1]);
}
