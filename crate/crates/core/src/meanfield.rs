//! Mean-field surrogate machinery: average entropy, the variational objective,
//! its ℓ2-regularized negative (the lower-level objective), projection onto the
//! feasible box, and the fixed-step projected gradient inner loop.
//!
//! All μ-gradients use the tied convention from [`crate::stats`]: μ_ij and μ_ji
//! move together, and gradient matrices mirror the tied derivative at both
//! entries. Norms over μ-objects are Frobenius norms of the full matrix.

use ndarray::Array2;

use crate::stats::{self, MeanField, StatKind, StatsVector, Theta};
use crate::{Error, Result};

/// Tuning constants for the lower-level problem.
#[derive(Debug, Clone)]
pub struct LowerLevelConfig {
    /// ℓ2 regularization weight ε ≥ 0 in (ε/2n²)‖μ‖_F².
    pub epsilon: f64,
    /// Boundary margin of the feasible box [ζ, 1-ζ].
    pub zeta: f64,
    /// Inner step size, taken as a raw value (size conventions such as
    /// 0.002·n² belong to the caller).
    pub alpha: f64,
    /// Number of projected gradient steps per inner loop.
    pub k_inner: usize,
}

impl Default for LowerLevelConfig {
    fn default() -> Self {
        Self { epsilon: 1e-2, zeta: 1e-6, alpha: 0.1, k_inner: 10 }
    }
}

impl LowerLevelConfig {
    pub fn validate(&self) -> Result<()> {
        stats::check_zeta(self.zeta)?;
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.k_inner < 1 {
            return Err(Error::Config("k_inner must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration record of one inner loop run.
#[derive(Debug, Clone)]
pub struct InnerTrace {
    /// Objective values f(θ, μ^(k)) for k = 0..=steps.
    pub f_values: Vec<f64>,
    /// Projected gradient mapping norms ‖μ^(k) - μ^(k+1)‖_F / α.
    pub grad_map_norms: Vec<f64>,
    /// Number of steps actually taken.
    pub steps: usize,
}

impl InnerTrace {
    /// Gap estimates f(μ^(k)) - f(μ^(last)) against the best recorded value.
    pub fn gap_estimates(&self) -> Vec<f64> {
        match self.f_values.last() {
            Some(&last) => self.f_values.iter().map(|f| f - last).collect(),
            None => Vec::new(),
        }
    }
}

/// Average entropy term H(μ) = (1/2n²) Σ_{i≠j} [μ log μ + (1-μ) log(1-μ)].
///
/// Nonpositive, minimized at μ ≡ 0.5; diagonal entries are excluded.
pub fn entropy(mf: &MeanField) -> Result<f64> {
    let n = mf.n();
    let mu = mf.matrix();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = mu[[i, j]];
            if v <= 0.0 || v >= 1.0 {
                return Err(Error::Domain(format!("entropy undefined at entry ({i},{j})={v}")));
            }
            total += v * v.ln() + (1.0 - v) * (1.0 - v).ln();
        }
    }
    let nf = n as f64;
    Ok(total / (2.0 * nf * nf))
}

/// Variational objective Γ(θ, μ) = Q(θ|μ)/n² - H(μ); its supremum over μ is
/// the mean-field approximation to the scaled log-normalizing constant.
pub fn gamma(theta: &Theta, mf: &MeanField) -> Result<f64> {
    Ok(stats::scaled_potential(theta, mf)? - entropy(mf)?)
}

/// Lower-level objective f(θ, μ) = -Γ(θ, μ) + (ε/2n²) Σ_{i,j} μ_ij².
pub fn f_lower(theta: &Theta, mf: &MeanField, cfg: &LowerLevelConfig) -> Result<f64> {
    let n = mf.n() as f64;
    let fro_sq: f64 = mf.matrix().iter().map(|v| v * v).sum();
    Ok(-gamma(theta, mf)? + cfg.epsilon / (2.0 * n * n) * fro_sq)
}

/// One evaluation of the lower-level objective with everything the outer
/// algorithm consumes: value, tied μ-gradient, and the statistics of μ.
#[derive(Debug, Clone)]
pub(crate) struct LowerEval {
    pub f: f64,
    pub grad: Array2<f64>,
    pub stats: StatsVector,
}

pub(crate) fn eval_lower(theta: &Theta, mf: &MeanField, cfg: &LowerLevelConfig) -> Result<LowerEval> {
    let n = mf.n();
    let nf = n as f64;
    let inv_n2 = 1.0 / (nf * nf);
    let needs_square = theta.spec.kinds().contains(&StatKind::Triangles);
    let sq = if needs_square { Some(mf.squared()) } else { None };

    let stat_values = stats::stats_vector_mf(mf, sq.as_ref(), &theta.spec)?;

    let mu = mf.matrix();
    let mut entropy_sum = 0.0;
    let mut fro_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = mu[[i, j]];
            if v <= 0.0 || v >= 1.0 {
                return Err(Error::Domain(format!("entry ({i},{j})={v} is outside (0,1)")));
            }
            entropy_sum += v * v.ln() + (1.0 - v) * (1.0 - v).ln();
            fro_sq += v * v;
        }
    }
    let f = -(stat_values.dot(&theta.values) * inv_n2 - 0.5 * entropy_sum * inv_n2)
        + cfg.epsilon * 0.5 * inv_n2 * fro_sq;

    // grad_ij = (1/n²) [ -⟨θ, dS/dμ_ij⟩ + logit(μ_ij) + 2ε μ_ij ]
    let mut grad = Array2::zeros((n, n));
    for (kind, coef) in theta.spec.kinds().iter().zip(&theta.values) {
        stats::add_stat_gradient(*kind, -coef * inv_n2, mf, sq.as_ref(), &theta.spec, &mut grad)?;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = mu[[i, j]];
                grad[[i, j]] += inv_n2 * ((v / (1.0 - v)).ln() + 2.0 * cfg.epsilon * v);
            }
        }
    }

    Ok(LowerEval { f, grad, stats: stat_values })
}

/// Tied gradient of the lower-level objective with respect to μ.
pub fn grad_f_lower_mu(theta: &Theta, mf: &MeanField, cfg: &LowerLevelConfig) -> Result<Array2<f64>> {
    Ok(eval_lower(theta, mf, cfg)?.grad)
}

/// Gradient of the lower-level objective with respect to θ: -S(μ)/n².
pub fn grad_f_lower_theta(theta: &Theta, mf: &MeanField) -> Result<Vec<f64>> {
    let n = mf.n() as f64;
    let s = stats::stats_vector(mf, &theta.spec)?;
    Ok(s.values.iter().map(|v| -v / (n * n)).collect())
}

/// Euclidean projection onto the feasible set: symmetrize, clamp entries to
/// [ζ, 1-ζ], zero the diagonal. Idempotent and non-expansive on the symmetric
/// zero-diagonal subspace.
pub fn project_feasible(raw: &Array2<f64>, zeta: f64) -> MeanField {
    let n = raw.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let sym = 0.5 * (raw[[i, j]] + raw[[j, i]]);
            out[[i, j]] = sym.clamp(zeta, 1.0 - zeta);
        }
    }
    MeanField::new(out, zeta).expect("projection output is feasible by construction")
}

/// Result of `inner_loop_full`: final iterate plus the evaluations the outer
/// loop reuses (at μ^(0) and μ^(K)).
pub(crate) struct InnerRun {
    pub mf: MeanField,
    pub trace: InnerTrace,
    pub at_start: LowerEval,
    pub at_end: LowerEval,
}

pub(crate) fn inner_loop_full(
    theta: &Theta,
    mu0: &MeanField,
    cfg: &LowerLevelConfig,
) -> Result<InnerRun> {
    let mut mf = mu0.clone();
    let mut eval = eval_lower(theta, &mf, cfg)?;
    let at_start = eval.clone();
    let mut trace = InnerTrace {
        f_values: vec![eval.f],
        grad_map_norms: Vec::with_capacity(cfg.k_inner),
        steps: 0,
    };
    if !eval.f.is_finite() {
        return Err(Error::Numeric("non-finite lower objective at inner step 0".into()));
    }
    for k in 0..cfg.k_inner {
        let raw = mf.matrix() - &(cfg.alpha * &eval.grad);
        let next = project_feasible(&raw, cfg.zeta);
        let mut moved_sq = 0.0;
        for (a, b) in mf.matrix().iter().zip(next.matrix().iter()) {
            let d = a - b;
            moved_sq += d * d;
        }
        trace.grad_map_norms.push(moved_sq.sqrt() / cfg.alpha);
        mf = next;
        eval = eval_lower(theta, &mf, cfg)?;
        if !eval.f.is_finite() {
            return Err(Error::Numeric(format!("non-finite lower objective at inner step {}", k + 1)));
        }
        trace.f_values.push(eval.f);
        trace.steps = k + 1;
    }
    Ok(InnerRun { mf, trace, at_start, at_end: eval })
}

/// Exactly K projected gradient steps with fixed step size α, starting from
/// `mu0`. Deterministic given its inputs; no early stopping.
pub fn inner_loop(
    theta: &Theta,
    mu0: &MeanField,
    cfg: &LowerLevelConfig,
) -> Result<(MeanField, InnerTrace)> {
    if cfg.k_inner == 0 {
        let eval = eval_lower(theta, mu0, cfg)?;
        let trace = InnerTrace { f_values: vec![eval.f], grad_map_norms: vec![], steps: 0 };
        return Ok((mu0.clone(), trace));
    }
    let run = inner_loop_full(theta, mu0, cfg)?;
    Ok((run.mf, run.trace))
}

fn tied_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Coefficients of the model's second-order statistics; only two-stars and
/// triangles contribute cross terms.
fn cross_coefficients(theta: &Theta) -> (f64, f64) {
    let mut two_stars = 0.0;
    let mut triangles = 0.0;
    for (kind, coef) in theta.spec.kinds().iter().zip(&theta.values) {
        match kind {
            StatKind::TwoStars => two_stars += coef,
            StatKind::Triangles => triangles += coef,
            _ => {}
        }
    }
    (two_stars, triangles)
}

/// Dense tied-variable Hessian of the lower-level objective, ordered by the
/// upper-triangle pair list.
fn tied_hessian_dense(theta: &Theta, mf: &MeanField, epsilon: f64) -> nalgebra::DMatrix<f64> {
    let n = mf.n();
    let nf = n as f64;
    let inv_n2 = 1.0 / (nf * nf);
    let mu = mf.matrix();
    let pairs = tied_pairs(n);
    let m = pairs.len();
    let (c_ts, c_tri) = cross_coefficients(theta);
    let mut h = nalgebra::DMatrix::zeros(m, m);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let v = mu[[i, j]];
        h[(p, p)] = inv_n2 * (1.0 / (v * (1.0 - v)) + 2.0 * epsilon);
        for (q, &(k, l)) in pairs.iter().enumerate().skip(p + 1) {
            let mut cross = 0.0;
            if c_ts != 0.0 {
                let overlap = usize::from(i == k) + usize::from(i == l) + usize::from(j == k)
                    + usize::from(j == l);
                cross += c_ts * overlap as f64 / nf;
            }
            if c_tri != 0.0 {
                let mut t = 0.0;
                if i == k {
                    t += mu[[l, j]];
                }
                if i == l {
                    t += mu[[k, j]];
                }
                if j == k {
                    t += mu[[i, l]];
                }
                if j == l {
                    t += mu[[i, k]];
                }
                cross += c_tri * t / nf;
            }
            let value = -inv_n2 * cross;
            h[(p, q)] = value;
            h[(q, p)] = value;
        }
    }
    h
}

/// Tied Hessian-vector product without materializing the matrix; `v` is a
/// symmetric zero-diagonal matrix standing for the tied vector.
fn tied_hessian_matvec(
    theta: &Theta,
    mf: &MeanField,
    epsilon: f64,
    v: &Array2<f64>,
) -> Array2<f64> {
    let n = mf.n();
    let nf = n as f64;
    let inv_n2 = 1.0 / (nf * nf);
    let mu = mf.matrix();
    let (c_ts, c_tri) = cross_coefficients(theta);
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let m = mu[[i, j]];
                out[[i, j]] = inv_n2 * (1.0 / (m * (1.0 - m)) + 2.0 * epsilon) * v[[i, j]];
            }
        }
    }
    if c_ts != 0.0 {
        let rows: Vec<f64> = (0..n).map(|i| v.row(i).sum()).collect();
        let scale = c_ts * inv_n2 / nf;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out[[i, j]] -= scale * (rows[i] + rows[j] - 2.0 * v[[i, j]]);
                }
            }
        }
    }
    if c_tri != 0.0 {
        let vm = v.dot(mu);
        let scale = c_tri * inv_n2 / nf;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out[[i, j]] -= scale * (vm[[i, j]] + vm[[j, i]]);
                }
            }
        }
    }
    out
}

fn tied_dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += a[[i, j]] * b[[i, j]];
        }
    }
    acc
}

/// Extreme eigenvalue of the tied Hessian by power iteration on the implicit
/// operator, with a spectral shift to reach the smallest one.
fn min_eig_power_iteration(theta: &Theta, mf: &MeanField, epsilon: f64) -> f64 {
    let n = mf.n();
    // deterministic start vector with no special symmetry
    let mut v = Array2::zeros((n, n));
    let mut state = 0x9e3779b97f4a7c15u64;
    for i in 0..n {
        for j in (i + 1)..n {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            v[[i, j]] = r;
            v[[j, i]] = r;
        }
    }
    let normalize = |m: &mut Array2<f64>| {
        let norm = tied_dot(m, m).sqrt();
        if norm > 0.0 {
            m.mapv_inplace(|x| x / norm);
        }
    };
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..400 {
        let mut w = tied_hessian_matvec(theta, mf, epsilon, &v);
        lambda = tied_dot(&v, &w);
        normalize(&mut w);
        v = w;
    }
    if lambda <= 0.0 {
        // dominant eigenvalue is already the most negative one
        return lambda;
    }
    // shift: largest eigenvalue of (c I - H) recovers the smallest of H
    let c = lambda * 1.01 + 1e-12;
    let mut u = v.clone();
    normalize(&mut u);
    let mut shifted = 0.0;
    for _ in 0..400 {
        let hv = tied_hessian_matvec(theta, mf, epsilon, &u);
        let mut w = &u * c - &hv;
        for i in 0..n {
            w[[i, i]] = 0.0;
        }
        shifted = tied_dot(&u, &w);
        normalize(&mut w);
        u = w;
    }
    c - shifted
}

/// Smallest eigenvalue of the tied-variable Hessian of the lower-level
/// objective at (θ, μ). Positive values certify local strong convexity, i.e.
/// the regime where the inner loop converges linearly.
///
/// Dense symmetric eigensolve up to n = 60; implicit power iteration above.
pub fn min_eig_hessian(theta: &Theta, mf: &MeanField, cfg: &LowerLevelConfig) -> f64 {
    if mf.n() <= 60 {
        let h = tied_hessian_dense(theta, mf, cfg.epsilon);
        let eigen = nalgebra::SymmetricEigen::new(h);
        eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        min_eig_power_iteration(theta, mf, cfg.epsilon)
    }
}

/// Gershgorin upper bound on the tied Hessian's spectral radius, usable as a
/// cheap Lipschitz estimate when picking inner step sizes.
pub fn hessian_row_sum_bound(theta: &Theta, mf: &MeanField, epsilon: f64) -> f64 {
    let h = tied_hessian_dense(theta, mf, epsilon);
    let m = h.nrows();
    let mut best: f64 = 0.0;
    for p in 0..m {
        let mut acc = 0.0;
        for q in 0..m {
            acc += h[(p, q)].abs();
        }
        best = best.max(acc);
    }
    best
}
