//! Graphs, link-probability matrices, and network sufficient statistics.
//!
//! Statistics carry their size scalings internally (edges are summed over
//! ordered pairs, two-stars scaled by 1/n, triangles by 1/(6n)), so the
//! potential is always a plain dot product `⟨θ, S(m)⟩` and parameter values
//! remain comparable across network sizes.
//!
//! Gradients with respect to a link-probability matrix use the tied
//! convention: `μ_ij` and `μ_ji` are one free variable, and derivative
//! matrices are reported on the full symmetric matrix with mirrored entries
//! and zero diagonal.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Kinds of network statistics supported by the model specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    /// Sum of entries over ordered pairs (each undirected edge counts twice).
    Edges,
    /// (1/n) Σ_i Σ_j Σ_{k>j} m_ij m_ik.
    TwoStars,
    /// (1/(6n)) Σ_{i,j,k} m_ij m_jk m_ki; equals (#triangles)/n on binary graphs.
    Triangles,
    /// Σ_{i≠j} z_ij m_ij for a user-supplied symmetric covariate z.
    DyadicCovariate,
}

impl StatKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "edges" => Ok(StatKind::Edges),
            "two_stars" => Ok(StatKind::TwoStars),
            "triangles" => Ok(StatKind::Triangles),
            "dyadic_covariate" => Ok(StatKind::DyadicCovariate),
            other => Err(Error::Config(format!("unknown statistic kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StatKind::Edges => "edges",
            StatKind::TwoStars => "two_stars",
            StatKind::Triangles => "triangles",
            StatKind::DyadicCovariate => "dyadic_covariate",
        }
    }
}

/// Ordered list of statistics plus the covariate matrix needed by
/// [`StatKind::DyadicCovariate`], if that kind is present.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kinds: Vec<StatKind>,
    covariate: Option<Array2<f64>>,
}

impl ModelSpec {
    pub fn new(kinds: Vec<StatKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::Config("statistic list must be nonempty".into()));
        }
        if kinds.contains(&StatKind::DyadicCovariate) {
            return Err(Error::Config(
                "dyadic_covariate requires a covariate matrix; use with_covariate".into(),
            ));
        }
        Ok(Self { kinds, covariate: None })
    }

    /// The paper's workhorse model: edges and triangles.
    pub fn edge_triangle() -> Self {
        Self { kinds: vec![StatKind::Edges, StatKind::Triangles], covariate: None }
    }

    pub fn edges_only() -> Self {
        Self { kinds: vec![StatKind::Edges], covariate: None }
    }

    /// Attach a symmetric zero-diagonal covariate matrix for the dyadic term.
    pub fn with_covariate(kinds: Vec<StatKind>, z: Array2<f64>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::Config("statistic list must be nonempty".into()));
        }
        if z.nrows() != z.ncols() {
            return Err(Error::Dimension("covariate matrix must be square".into()));
        }
        for i in 0..z.nrows() {
            for j in 0..i {
                if (z[[i, j]] - z[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Domain("covariate matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { kinds, covariate: Some(z) })
    }

    pub fn kinds(&self) -> &[StatKind] {
        &self.kinds
    }

    pub fn covariate(&self) -> Option<&Array2<f64>> {
        self.covariate.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    /// True when the spec is exactly `[edges, triangles]`, the model for
    /// which the fixed-point baseline has a closed-form update.
    pub fn is_edge_triangle(&self) -> bool {
        self.kinds == [StatKind::Edges, StatKind::Triangles]
    }

    fn covariate_for(&self, n: usize) -> Result<&Array2<f64>> {
        let z = self.covariate.as_ref().ok_or_else(|| {
            Error::Config("dyadic_covariate statistic requires a covariate matrix".into())
        })?;
        if z.nrows() != n {
            return Err(Error::Dimension(format!(
                "covariate matrix is {}x{} but the network has {n} nodes",
                z.nrows(),
                z.ncols()
            )));
        }
        Ok(z)
    }
}

/// ERGM parameter vector paired with the statistics it multiplies.
#[derive(Debug, Clone)]
pub struct Theta {
    pub values: Vec<f64>,
    pub spec: ModelSpec,
}

impl Theta {
    pub fn new(values: Vec<f64>, spec: ModelSpec) -> Result<Self> {
        if values.len() != spec.dim() {
            return Err(Error::Dimension(format!(
                "theta has {} entries but the spec lists {} statistics",
                values.len(),
                spec.dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("theta entries must be finite".into()));
        }
        Ok(Self { values, spec })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Values of the statistics listed in a [`ModelSpec`], in spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsVector {
    pub values: Vec<f64>,
}

impl StatsVector {
    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.values.iter().zip(theta).map(|(s, t)| s * t).sum()
    }

    /// Componentwise `(self - other) * scale`.
    pub fn diff_scaled(&self, other: &StatsVector, scale: f64) -> Vec<f64> {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * scale)
            .collect()
    }
}

/// Common read-only view over observed graphs and link-probability matrices.
pub trait DyadMatrix {
    fn n(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;
}

/// Observed network: symmetric binary adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Array2<u8>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: Array2::zeros((n, n)) }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    g.adj[[i, j]] = 1;
                }
            }
        }
        g
    }

    pub fn from_adjacency(adj: Array2<u8>) -> Result<Self> {
        let n = adj.nrows();
        if adj.ncols() != n {
            return Err(Error::Dimension("adjacency matrix must be square".into()));
        }
        for i in 0..n {
            if adj[[i, i]] != 0 {
                return Err(Error::Domain(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                if adj[[i, j]] > 1 {
                    return Err(Error::Domain(format!("entry ({i},{j}) is not 0/1")));
                }
                if adj[[i, j]] != adj[[j, i]] {
                    return Err(Error::Domain(format!("asymmetric entries at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, adj })
    }

    /// Build from undirected edge list; panics are avoided, bad indices error.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Domain(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::Domain(format!("self-loop at node {i}")));
            }
            g.adj[[i, j]] = 1;
            g.adj[[j, i]] = 1;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adj
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[[i, j]] == 1
    }

    pub fn set_dyad(&mut self, i: usize, j: usize, present: bool) {
        debug_assert!(i != j);
        let v = u8::from(present);
        self.adj[[i, j]] = v;
        self.adj[[j, i]] = v;
    }

    pub fn toggle_dyad(&mut self, i: usize, j: usize) {
        let v = self.adj[[i, j]] ^ 1;
        self.adj[[i, j]] = v;
        self.adj[[j, i]] = v;
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).map(|j| usize::from(self.adj[[i, j]])).sum()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let total: usize = self.adj.iter().map(|&v| usize::from(v)).sum();
        total / 2
    }

    /// Fraction of present dyads among the n(n-1)/2 possible ones.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    /// Common neighbors of i and j, ignoring the (i,j) dyad itself.
    pub fn common_neighbors(&self, i: usize, j: usize) -> usize {
        (0..self.n)
            .filter(|&k| k != i && k != j)
            .map(|k| usize::from(self.adj[[i, k]] & self.adj[[j, k]]))
            .sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.adj.mapv(f64::from)
    }
}

impl DyadMatrix for Graph {
    fn n(&self) -> usize {
        self.n
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        f64::from(self.adj[[i, j]])
    }
}

/// Link-probability surrogate: symmetric matrix in [ζ, 1-ζ] off the diagonal,
/// zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    mu: Array2<f64>,
    zeta: f64,
}

impl MeanField {
    pub fn new(mu: Array2<f64>, zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        let n = mu.nrows();
        if mu.ncols() != n {
            return Err(Error::Dimension("mean-field matrix must be square".into()));
        }
        for i in 0..n {
            if mu[[i, i]] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = mu[[i, j]];
                if !(zeta..=1.0 - zeta).contains(&v) {
                    return Err(Error::Domain(format!(
                        "entry ({i},{j})={v} outside [{zeta}, {}]",
                        1.0 - zeta
                    )));
                }
                if (v - mu[[j, i]]).abs() != 0.0 {
                    return Err(Error::Domain(format!("asymmetric entries at ({i},{j})")));
                }
            }
        }
        Ok(Self { mu, zeta })
    }

    /// Constant off-diagonal value, clamped into [ζ, 1-ζ].
    pub fn constant(n: usize, value: f64, zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        let v = value.clamp(zeta, 1.0 - zeta);
        let mut mu = Array2::from_elem((n, n), v);
        for i in 0..n {
            mu[[i, i]] = 0.0;
        }
        Ok(Self { mu, zeta })
    }

    pub fn n(&self) -> usize {
        self.mu.nrows()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.mu
    }

    /// μ·μ, the workhorse product for triangle statistics and gradients.
    pub fn squared(&self) -> Array2<f64> {
        self.mu.dot(&self.mu)
    }
}

impl DyadMatrix for MeanField {
    fn n(&self) -> usize {
        self.mu.nrows()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.mu[[i, j]]
    }
}

pub(crate) fn check_zeta(zeta: f64) -> Result<()> {
    if !(zeta > 0.0 && zeta < 0.5) {
        return Err(Error::Config(format!("zeta must lie in (0, 0.5), got {zeta}")));
    }
    Ok(())
}

/// Σ_{i≠j} m_ij over ordered pairs; each undirected edge contributes twice.
pub fn stat_edges<M: DyadMatrix>(m: &M) -> f64 {
    let n = m.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += m.entry(i, j);
            }
        }
    }
    total
}

/// (1/n) Σ_i Σ_j Σ_{k>j} m_ij m_ik. Terms touching the diagonal vanish since
/// m_ii = 0, so the pair sum per node reduces to (r_i² - Σ_j m_ij²)/2.
pub fn stat_two_stars<M: DyadMatrix>(m: &M) -> f64 {
    let n = m.n();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        let mut row_sq = 0.0;
        for j in 0..n {
            let v = m.entry(i, j);
            row += v;
            row_sq += v * v;
        }
        total += 0.5 * (row * row - row_sq);
    }
    total / n as f64
}

/// (1/(6n)) Σ_{i,j,k} m_ij m_jk m_ki; on binary graphs this equals the
/// undirected triangle count divided by n.
pub fn stat_triangles<M: DyadMatrix>(m: &M) -> f64 {
    let n = m.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mij = m.entry(i, j);
            if mij == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for k in 0..n {
                acc += m.entry(j, k) * m.entry(k, i);
            }
            total += mij * acc;
        }
    }
    total / (6.0 * n as f64)
}

/// Σ_{i≠j} z_ij m_ij for symmetric z.
pub fn stat_dyadic_covariate<M: DyadMatrix>(m: &M, z: &Array2<f64>) -> f64 {
    let n = m.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += z[[i, j]] * m.entry(i, j);
            }
        }
    }
    total
}

/// Statistics requested by `spec`, in order.
pub fn stats_vector<M: DyadMatrix>(m: &M, spec: &ModelSpec) -> Result<StatsVector> {
    let mut values = Vec::with_capacity(spec.dim());
    for kind in spec.kinds() {
        let v = match kind {
            StatKind::Edges => stat_edges(m),
            StatKind::TwoStars => stat_two_stars(m),
            StatKind::Triangles => stat_triangles(m),
            StatKind::DyadicCovariate => stat_dyadic_covariate(m, spec.covariate_for(m.n())?),
        };
        values.push(v);
    }
    Ok(StatsVector { values })
}

/// Statistics of a mean-field matrix reusing a precomputed μ² product
/// (required when the spec includes triangles).
pub(crate) fn stats_vector_mf(
    mf: &MeanField,
    sq: Option<&Array2<f64>>,
    spec: &ModelSpec,
) -> Result<StatsVector> {
    let n = mf.n();
    let mu = mf.matrix();
    let mut values = Vec::with_capacity(spec.dim());
    for kind in spec.kinds() {
        let v = match kind {
            StatKind::Edges => mu.sum(),
            StatKind::TwoStars => stat_two_stars(mf),
            StatKind::Triangles => {
                let sq = sq.expect("triangle statistic requires the squared matrix");
                // tr(μ³) = Σ_ij (μ²)_ij μ_ij for symmetric μ
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += sq[[i, j]] * mu[[i, j]];
                    }
                }
                acc / (6.0 * n as f64)
            }
            StatKind::DyadicCovariate => stat_dyadic_covariate(mf, spec.covariate_for(n)?),
        };
        values.push(v);
    }
    Ok(StatsVector { values })
}

/// Potential Q(θ | m) = ⟨θ, S(m)⟩.
pub fn potential<M: DyadMatrix>(theta: &Theta, m: &M) -> Result<f64> {
    let s = stats_vector(m, &theta.spec)?;
    Ok(s.dot(&theta.values))
}

/// Size-scaled potential Q(θ | m) / n².
pub fn scaled_potential<M: DyadMatrix>(theta: &Theta, m: &M) -> Result<f64> {
    let n = m.n() as f64;
    Ok(potential(theta, m)? / (n * n))
}

/// Per-statistic tied derivative matrices dS/dμ_ij, treating μ_ij and μ_ji
/// as one variable. Symmetric with zero diagonal.
///
/// Edges give the constant 2 off the diagonal (both ordered entries move),
/// two-stars give (r_i + r_j - 2μ_ij)/n, triangles (μ²)_ij/n, and the dyadic
/// covariate 2 z_ij.
pub fn stats_gradient_mu(mf: &MeanField, spec: &ModelSpec) -> Result<Vec<Array2<f64>>> {
    let n = mf.n();
    let needs_square = spec.kinds().contains(&StatKind::Triangles);
    let sq = if needs_square { Some(mf.squared()) } else { None };
    let mut grads = Vec::with_capacity(spec.dim());
    for kind in spec.kinds() {
        let mut g = Array2::zeros((n, n));
        add_stat_gradient(*kind, 1.0, mf, sq.as_ref(), spec, &mut g)?;
        grads.push(g);
    }
    Ok(grads)
}

/// Accumulate `coef * dS_kind/dμ` into `out` (off-diagonal only).
pub(crate) fn add_stat_gradient(
    kind: StatKind,
    coef: f64,
    mf: &MeanField,
    sq: Option<&Array2<f64>>,
    spec: &ModelSpec,
    out: &mut Array2<f64>,
) -> Result<()> {
    let n = mf.n();
    let nf = n as f64;
    let mu = mf.matrix();
    match kind {
        StatKind::Edges => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out[[i, j]] += 2.0 * coef;
                    }
                }
            }
        }
        StatKind::TwoStars => {
            let rows: Vec<f64> = (0..n).map(|i| mu.row(i).sum()).collect();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out[[i, j]] += coef * (rows[i] + rows[j] - 2.0 * mu[[i, j]]) / nf;
                    }
                }
            }
        }
        StatKind::Triangles => {
            let sq = sq.expect("triangle gradient requires the squared matrix");
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out[[i, j]] += coef * sq[[i, j]] / nf;
                    }
                }
            }
        }
        StatKind::DyadicCovariate => {
            let z = spec.covariate_for(n)?;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out[[i, j]] += 2.0 * coef * z[[i, j]];
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exact statistic change T(g with ij = 1) - T(g with ij = 0), computed
/// incrementally from the graph with the dyad removed.
///
/// The statistics are multilinear in the tied dyad variable, so the change
/// equals the tied derivative evaluated on g without the (i,j) edge.
pub fn change_stats(g: &Graph, i: usize, j: usize, spec: &ModelSpec) -> Result<StatsVector> {
    if i == j {
        return Err(Error::Domain("change statistics need i != j".into()));
    }
    let n = g.n();
    let nf = n as f64;
    let present = g.has_edge(i, j);
    let mut values = Vec::with_capacity(spec.dim());
    for kind in spec.kinds() {
        let v = match kind {
            StatKind::Edges => 2.0,
            StatKind::TwoStars => {
                let di = g.degree(i) as f64 - if present { 1.0 } else { 0.0 };
                let dj = g.degree(j) as f64 - if present { 1.0 } else { 0.0 };
                (di + dj) / nf
            }
            StatKind::Triangles => g.common_neighbors(i, j) as f64 / nf,
            StatKind::DyadicCovariate => 2.0 * spec.covariate_for(n)?[[i, j]],
        };
        values.push(v);
    }
    Ok(StatsVector { values })
}
