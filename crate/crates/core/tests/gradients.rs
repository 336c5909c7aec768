//! Central-difference verification of every analytic gradient: the
//! per-statistic tied derivatives, the lower-level μ- and θ-gradients, the
//! upper gradient, and the surrogate-gap gradient blocks.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use ergm_core::bilevel;
use ergm_core::gradcheck::{fd_grad_mu, fd_grad_vec, random_mean_field, rel_error_matrix, rel_error_vec};
use ergm_core::meanfield::{self, LowerLevelConfig};
use ergm_core::sampler;
use ergm_core::stats::{self, ModelSpec, StatKind, Theta};

const H: f64 = 1e-6;
const TOL: f64 = 1e-6;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(20240817)
}

#[test]
fn statistic_gradients_match_central_differences() {
    let mut rng = rng();
    for _ in 0..20 {
        let n = rng.gen_range(3..=8);
        let mut z = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(-1.0..1.0);
                z[[i, j]] = v;
                z[[j, i]] = v;
            }
        }
        let spec = ModelSpec::with_covariate(
            vec![StatKind::Edges, StatKind::TwoStars, StatKind::Triangles, StatKind::DyadicCovariate],
            z,
        )
        .unwrap();
        let mf = random_mean_field(n, 0.05, 0.95, 1e-9, &mut rng);
        let grads = stats::stats_gradient_mu(&mf, &spec).unwrap();
        for (idx, analytic) in grads.iter().enumerate() {
            let spec_ref = &spec;
            let numeric = fd_grad_mu(
                |m| stats::stats_vector(m, spec_ref).unwrap().values[idx],
                &mf,
                H,
            );
            let err = rel_error_matrix(analytic, &numeric, 1e-10);
            assert!(err < TOL, "statistic {idx} gradient off by {err:.2e} at n={n}");
        }
    }
}

#[test]
fn lower_gradient_mu_matches_central_differences() {
    let mut rng = rng();
    let spec = ModelSpec::edge_triangle();
    for &eps in &[0.0, 1e-2, 1.0] {
        for _ in 0..20 {
            let n = rng.gen_range(3..=8);
            let theta = Theta::new(
                vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                spec.clone(),
            )
            .unwrap();
            let cfg = LowerLevelConfig { epsilon: eps, zeta: 1e-9, alpha: 0.1, k_inner: 1 };
            let mf = random_mean_field(n, 0.05, 0.95, 1e-9, &mut rng);
            let analytic = meanfield::grad_f_lower_mu(&theta, &mf, &cfg).unwrap();
            let numeric =
                fd_grad_mu(|m| meanfield::f_lower(&theta, m, &cfg).unwrap(), &mf, H);
            let err = rel_error_matrix(&analytic, &numeric, 1e-10);
            assert!(err < TOL, "mu gradient off by {err:.2e} at n={n}, eps={eps}");
        }
    }
}

#[test]
fn lower_gradient_theta_matches_central_differences() {
    let mut rng = rng();
    let spec = ModelSpec::edge_triangle();
    for _ in 0..20 {
        let n = rng.gen_range(3..=8);
        let theta_values = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let theta = Theta::new(theta_values.clone(), spec.clone()).unwrap();
        let cfg = LowerLevelConfig { epsilon: 0.01, zeta: 1e-9, alpha: 0.1, k_inner: 1 };
        let mf = random_mean_field(n, 0.05, 0.95, 1e-9, &mut rng);
        let analytic = meanfield::grad_f_lower_theta(&theta, &mf).unwrap();
        let spec_ref = spec.clone();
        let mf_ref = &mf;
        let numeric = fd_grad_vec(
            |vals| {
                let t = Theta::new(vals.to_vec(), spec_ref.clone()).unwrap();
                meanfield::f_lower(&t, mf_ref, &cfg).unwrap()
            },
            &theta_values,
            H,
        );
        let err = rel_error_vec(&analytic, &numeric, 1e-10);
        assert!(err < TOL, "theta gradient off by {err:.2e} at n={n}");
    }
}

#[test]
fn upper_gradient_matches_central_differences() {
    let mut rng = rng();
    let spec = ModelSpec::edge_triangle();
    for _ in 0..20 {
        let n = rng.gen_range(3..=8);
        let truth = Theta::new(vec![-1.0, 1.0], spec.clone()).unwrap();
        let chain = sampler::SamplerConfig {
            burn_in: 500,
            thinning: 10,
            count: 1,
            init_p: 0.4,
            seed: rng.gen(),
            proposal: sampler::ProposalRule::Metropolis,
        };
        let g = sampler::metropolis_sample(n, &truth, &chain).unwrap().pop().unwrap();
        let theta_values = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let theta = Theta::new(theta_values.clone(), spec.clone()).unwrap();
        let cfg = LowerLevelConfig { epsilon: 0.01, zeta: 1e-9, alpha: 0.1, k_inner: 1 };
        let mu_star = random_mean_field(n, 0.05, 0.95, 1e-9, &mut rng);
        let analytic = bilevel::grad_upper_theta(&theta, &g, &mu_star).unwrap();
        let spec_ref = spec.clone();
        let numeric = fd_grad_vec(
            |vals| {
                let t = Theta::new(vals.to_vec(), spec_ref.clone()).unwrap();
                bilevel::upper_f(&t, &g, &mu_star, &cfg).unwrap()
            },
            &theta_values,
            H,
        );
        let err = rel_error_vec(&analytic, &numeric, 1e-10);
        assert!(err < TOL, "upper gradient off by {err:.2e} at n={n}");
    }
}

#[test]
fn q_hat_gradient_matches_central_differences() {
    let mut rng = rng();
    let spec = ModelSpec::edge_triangle();
    for _ in 0..20 {
        let n = rng.gen_range(3..=8);
        let theta_values = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let theta = Theta::new(theta_values.clone(), spec.clone()).unwrap();
        let cfg = LowerLevelConfig { epsilon: 1e-2, zeta: 1e-9, alpha: 0.1, k_inner: 1 };
        let mu = random_mean_field(n, 0.05, 0.95, 1e-9, &mut rng);
        let mu_k = random_mean_field(n, 0.05, 0.95, 1e-9, &mut rng);
        let (theta_block, mu_block) = bilevel::grad_q_hat(&theta, &mu, &mu_k, &cfg).unwrap();

        let spec_ref = spec.clone();
        let numeric_theta = fd_grad_vec(
            |vals| {
                let t = Theta::new(vals.to_vec(), spec_ref.clone()).unwrap();
                bilevel::q_hat(&t, &mu, &mu_k, &cfg).unwrap()
            },
            &theta_values,
            H,
        );
        let err_theta = rel_error_vec(&theta_block, &numeric_theta, 1e-10);
        assert!(err_theta < TOL, "q̂ theta block off by {err_theta:.2e} at n={n}");

        let numeric_mu =
            fd_grad_mu(|m| bilevel::q_hat(&theta, m, &mu_k, &cfg).unwrap(), &mu, H);
        let err_mu = rel_error_matrix(&mu_block, &numeric_mu, 1e-10);
        assert!(err_mu < TOL, "q̂ mu block off by {err_mu:.2e} at n={n}");
    }
}
