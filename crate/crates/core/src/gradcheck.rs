//! Central finite-difference oracles for gradient verification.
//!
//! These evaluate objective values only, so they stay independent of the
//! analytic gradient paths they are used to check. μ-differences follow the
//! tied convention: the (i,j) and (j,i) entries move together.

use ndarray::Array2;

use crate::stats::MeanField;

/// Tied central difference of a scalar function of a mean-field matrix.
/// The perturbed matrices are rebuilt with a loose boundary margin, so the
/// base point must sit at least `h` inside (0,1).
pub fn fd_grad_mu<F>(f: F, mf: &MeanField, h: f64) -> Array2<f64>
where
    F: Fn(&MeanField) -> f64,
{
    let n = mf.n();
    let margin = 1e-15;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut up = mf.matrix().clone();
            up[[i, j]] += h;
            up[[j, i]] += h;
            let mut down = mf.matrix().clone();
            down[[i, j]] -= h;
            down[[j, i]] -= h;
            let fu = f(&MeanField::new(up, margin).expect("perturbed point stays in (0,1)"));
            let fd = f(&MeanField::new(down, margin).expect("perturbed point stays in (0,1)"));
            let g = (fu - fd) / (2.0 * h);
            out[[i, j]] = g;
            out[[j, i]] = g;
        }
    }
    out
}

/// Central difference of a scalar function of a plain vector.
pub fn fd_grad_vec<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let mut up = x.to_vec();
        up[k] += h;
        let mut down = x.to_vec();
        down[k] -= h;
        out.push((f(&up) - f(&down)) / (2.0 * h));
    }
    out
}

/// ‖a - b‖ / max(‖b‖, floor) over all entries of two matrices.
pub fn rel_error_matrix(a: &Array2<f64>, b: &Array2<f64>, floor: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num.sqrt()) / den.sqrt().max(floor)
}

/// ‖a - b‖ / max(‖b‖, floor) for vectors.
pub fn rel_error_vec(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num.sqrt()) / den.sqrt().max(floor)
}

/// Seeded random feasible mean-field matrix with entries in [lo, hi].
pub fn random_mean_field(n: usize, lo: f64, hi: f64, zeta: f64, rng: &mut impl rand::Rng) -> MeanField {
    let mut raw = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(lo..hi);
            raw[[i, j]] = v;
            raw[[j, i]] = v;
        }
    }
    MeanField::new(raw, zeta).expect("entries drawn inside the box")
}
