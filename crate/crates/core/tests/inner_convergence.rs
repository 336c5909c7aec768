//! Inner-loop convergence behavior in the strongly convex (regularized)
//! regime, plus projection properties.

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use ergm_core::gradcheck::random_mean_field;
use ergm_core::meanfield::{self, LowerLevelConfig};
use ergm_core::stats::{ModelSpec, Theta};

/// R² of the least-squares line through (x, y).
fn linear_fit_r2(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

#[test]
fn gap_decays_geometrically_when_hessian_is_positive() {
    let spec = ModelSpec::edge_triangle();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut verified = 0;
    while verified < 10 {
        let n = rng.gen_range(4..=7);
        let theta = Theta::new(
            vec![rng.gen_range(-1.0..0.0), rng.gen_range(-0.5..0.5)],
            spec.clone(),
        )
        .unwrap();
        let cfg = LowerLevelConfig { epsilon: 0.5, zeta: 1e-6, alpha: 0.4, k_inner: 60 };
        let mu0 = random_mean_field(n, 0.25, 0.75, 1e-6, &mut rng);

        // reference optimum from a much longer run
        let long = LowerLevelConfig { k_inner: 4000, ..cfg.clone() };
        let (mu_star, _) = meanfield::inner_loop(&theta, &mu0, &long).unwrap();
        let f_star = meanfield::f_lower(&theta, &mu_star, &cfg).unwrap();

        // positive curvature along the short trajectory keeps us in the
        // linear-rate regime
        let (mu_end, trace) = meanfield::inner_loop(&theta, &mu0, &cfg).unwrap();
        let lam_start = meanfield::min_eig_hessian(&theta, &mu0, &cfg);
        let lam_end = meanfield::min_eig_hessian(&theta, &mu_end, &cfg);
        if lam_start <= 0.0 || lam_end <= 0.0 {
            continue;
        }
        verified += 1;

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (k, f) in trace.f_values.iter().enumerate() {
            let gap = f - f_star;
            if gap > 1e-13 {
                xs.push(k as f64);
                ys.push(gap.ln());
            }
        }
        assert!(xs.len() >= 10, "gap hit the floor too early");
        // consecutive ratio strictly below one
        for w in ys.windows(2) {
            assert!(w[1] < w[0], "gap failed to shrink");
        }
        let r2 = linear_fit_r2(&xs, &ys);
        assert!(r2 > 0.95, "log-gap fit R² = {r2:.4}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent(n in 2usize..7, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                raw[[i, j]] = rng.gen_range(-1.0..2.0);
            }
        }
        let zeta = 1e-6;
        let once = meanfield::project_feasible(&raw, zeta);
        let twice = meanfield::project_feasible(once.matrix(), zeta);
        prop_assert_eq!(&once, &twice);
    }

    #[test]
    fn projection_is_nonexpansive_on_symmetric_matrices(n in 2usize..7, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zeta = 1e-6;
        let mut draw = || {
            let mut raw = Array2::zeros((n, n));
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = rng.gen_range(-1.0..2.0);
                    raw[[i, j]] = v;
                    raw[[j, i]] = v;
                }
            }
            raw
        };
        let a = draw();
        let b = draw();
        let pa = meanfield::project_feasible(&a, zeta);
        let pb = meanfield::project_feasible(&b, zeta);
        let dist = |x: &Array2<f64>, y: &Array2<f64>| -> f64 {
            x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
        };
        prop_assert!(dist(pa.matrix(), pb.matrix()) <= dist(&a, &b) + 1e-12);
    }
}
