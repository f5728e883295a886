//! Data standardization, the generalized double Pareto edge density, tree
//! priors and the log edge-score matrix `q`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `n x p` observations, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    y: DMatrix<f64>,
    names: Vec<String>,
    standardized: bool,
}

impl DataMatrix {
    /// Centers each column and divides by its sample standard deviation
    /// (divisor `n - 1`).
    pub fn standardize(raw: DMatrix<f64>) -> Result<Self> {
        let names = (1..=raw.ncols()).map(|j| format!("V{j}")).collect();
        Self::standardize_named(raw, names)
    }

    pub fn standardize_named(mut raw: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = raw.shape();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 samples to standardize, got {n}"
            )));
        }
        if names.len() != p {
            return Err(Error::Dimension(format!(
                "{} names for {p} columns",
                names.len()
            )));
        }
        for j in 0..p {
            let mut col = raw.column_mut(j);
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
            let ss = col.iter().map(|x| x * x).sum::<f64>();
            let sd = (ss / (n - 1) as f64).sqrt();
            let scale = col.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(mean.abs());
            if !(sd > 1e-12 * scale.max(f64::MIN_POSITIVE)) || sd == 0.0 {
                return Err(Error::ConstantColumn(names[j].clone()));
            }
            col /= sd;
        }
        Ok(Self {
            y: raw,
            names,
            standardized: true,
        })
    }

    /// Wraps coordinates without rescaling, e.g. 2-D point sets where
    /// each point is a variable.
    pub fn raw(y: DMatrix<f64>) -> Self {
        let names = (1..=y.ncols()).map(|j| format!("V{j}")).collect();
        Self {
            y,
            names,
            standardized: false,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Reorders columns so that new column `perm[j]` is old column `j`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let p = self.p();
        assert_eq!(perm.len(), p);
        let mut y = DMatrix::zeros(self.n(), p);
        let mut names = vec![String::new(); p];
        for j in 0..p {
            y.set_column(perm[j], &self.y.column(j));
            names[perm[j]] = self.names[j].clone();
        }
        Self {
            y,
            names,
            standardized: self.standardized,
        }
    }

    /// Pairwise Euclidean distances between columns.
    pub fn distances(&self) -> PairwiseDistances {
        PairwiseDistances::from_data(self)
    }

    /// Empirical covariance `YᵀY / n`.
    pub fn empirical_covariance(&self) -> DMatrix<f64> {
        self.y.tr_mul(&self.y) / self.n() as f64
    }
}

/// Column distances `‖y_j - y_k‖₂` and the dissimilarity
/// `W_n[j,k] = S_jj + S_kk - 2 S_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances {
    pub dist: DMatrix<f64>,
    pub w_n: DMatrix<f64>,
    n: usize,
}

impl PairwiseDistances {
    pub fn from_data(data: &DataMatrix) -> Self {
        let (n, p) = (data.n(), data.p());
        let y = data.values();
        let mut dist = DMatrix::zeros(p, p);
        for j in 0..p {
            for k in (j + 1)..p {
                // summation order fixed by sample index, independent of labels
                let ss: f64 = y
                    .column(j)
                    .iter()
                    .zip(y.column(k).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let d = ss.sqrt();
                dist[(j, k)] = d;
                dist[(k, j)] = d;
            }
        }
        let s = data.empirical_covariance();
        let w_n = DMatrix::from_fn(p, p, |j, k| {
            if j == k {
                0.0
            } else {
                (s[(j, j)] + s[(k, k)] - 2.0 * s[(j, k)]).max(0.0)
            }
        });
        Self { dist, w_n, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.dist.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.dist[(j, k)]
    }
}

/// Hyperparameters of the global-local shrinkage prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageParams {
    /// GDP shape `α`.
    pub alpha: f64,
    /// Global scale `τ`.
    pub tau: f64,
    /// Prior mean of the exponential prior on `τ`.
    pub mu_tau: f64,
}

impl ShrinkageParams {
    pub const DEFAULT_ALPHA: f64 = 5.0;

    pub fn new(alpha: f64, tau: f64, mu_tau: f64) -> Result<Self> {
        let out = Self { alpha, tau, mu_tau };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("tau", self.tau), ("mu_tau", self.mu_tau)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `α = 5`, `τ = μ_τ = ` the empirical smallest scale of `data`.
    pub fn from_data(data: &DataMatrix) -> Result<Self> {
        let mu = empirical_tau_prior_mean(data)?;
        Self::new(Self::DEFAULT_ALPHA, mu, mu)
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }
}

/// Prior over spanning trees.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TreePrior {
    #[default]
    Uniform,
    /// Edge-based prior `∝ Π η_jk`; zero entries block edges.
    Edge { eta: DMatrix<f64> },
    /// Degree-based prior with `η_jk = v_j v_k` and a Dirichlet
    /// hyperprior of concentration `alpha_dir` on `v`.
    Degree { v: Vec<f64>, alpha_dir: f64 },
}

impl TreePrior {
    /// Degree prior with uniform weights `v_j = 1/p`.
    pub fn degree_uniform(p: usize, alpha_dir: f64) -> Self {
        Self::Degree {
            v: vec![1.0 / p as f64; p],
            alpha_dir,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Self::Uniform => Ok(()),
            Self::Edge { eta } => {
                if eta.shape() != (p, p) {
                    return Err(Error::Dimension(format!(
                        "eta is {}x{}, expected {p}x{p}",
                        eta.nrows(),
                        eta.ncols()
                    )));
                }
                for j in 0..p {
                    for k in 0..p {
                        let v = eta[(j, k)];
                        if j != k && !(v >= 0.0 && v.is_finite()) {
                            return Err(Error::InvalidParameter(format!(
                                "eta[{j},{k}] = {v} must be finite and non-negative"
                            )));
                        }
                        if (v - eta[(k, j)]).abs() > 1e-12 * v.abs().max(1.0) {
                            return Err(Error::InvalidParameter(format!(
                                "eta is not symmetric at ({j},{k})"
                            )));
                        }
                    }
                }
                Ok(())
            }
            Self::Degree { v, alpha_dir } => {
                if v.len() != p {
                    return Err(Error::Dimension(format!("{} degree weights for {p} nodes", v.len())));
                }
                if !(*alpha_dir > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Dirichlet concentration must be positive, got {alpha_dir}"
                    )));
                }
                if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::InvalidParameter("degree weights must be positive".into()));
                }
                let sum: f64 = v.iter().sum();
                if (sum - 1.0).abs() > 1e-8 {
                    return Err(Error::InvalidParameter(format!(
                        "degree weights must sum to 1, got {sum}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `log η_jk`, `-∞` for blocked edges.
    pub fn log_eta(&self, j: usize, k: usize) -> f64 {
        match self {
            Self::Uniform => 0.0,
            Self::Edge { eta } => eta[(j, k)].ln(),
            Self::Degree { v, .. } => v[j].ln() + v[k].ln(),
        }
    }
}

/// Symmetric matrix of log edge scores `q_jk`; the diagonal holds `-∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightMatrix {
    q: DMatrix<f64>,
    /// Per-edge log-density terms dropped from `q` because they are the same
    /// for every edge: `log C(n) + log Γ(α+n) - log Γ(α) - n log τ`.
    edge_constant: f64,
}

impl LogWeightMatrix {
    /// Wraps an arbitrary symmetric score matrix; the diagonal is ignored.
    pub fn from_matrix(mut q: DMatrix<f64>) -> Result<Self> {
        let p = q.nrows();
        if q.ncols() != p {
            return Err(Error::Dimension("q must be square".into()));
        }
        for j in 0..p {
            q[(j, j)] = f64::NEG_INFINITY;
            for k in (j + 1)..p {
                let (a, b) = (q[(j, k)], q[(k, j)]);
                if a.is_nan() || b.is_nan() || a == f64::INFINITY || b == f64::INFINITY {
                    return Err(Error::InvalidParameter(format!("q[{j},{k}] is not a valid log weight")));
                }
                if a != b && (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!("q is not symmetric at ({j},{k})")));
                }
            }
        }
        Ok(Self { q, edge_constant: 0.0 })
    }

    /// All-zero scores: the uniform distribution over trees.
    pub fn uniform(p: usize) -> Self {
        Self::from_matrix(DMatrix::zeros(p, p)).expect("zeros are valid")
    }

    pub fn p(&self) -> usize {
        self.q.nrows()
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.q[(j, k)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn edge_constant(&self) -> f64 {
        self.edge_constant
    }

    /// Largest finite off-diagonal score, if any.
    pub fn max_finite(&self) -> Option<f64> {
        let p = self.p();
        let mut best: Option<f64> = None;
        for j in 0..p {
            for k in (j + 1)..p {
                let v = self.q[(j, k)];
                if v.is_finite() {
                    best = Some(best.map_or(v, |b| b.max(v)));
                }
            }
        }
        best
    }

    /// Adds `c` to every off-diagonal entry.
    pub fn shifted(&self, c: f64) -> Self {
        let p = self.p();
        let q = DMatrix::from_fn(p, p, |j, k| if j == k { f64::NEG_INFINITY } else { self.q[(j, k)] + c });
        Self {
            q,
            edge_constant: self.edge_constant,
        }
    }

    /// Applies `a + b q` to every off-diagonal entry.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let p = self.p();
        let q = DMatrix::from_fn(p, p, |j, k| {
            if j == k {
                f64::NEG_INFINITY
            } else {
                a + b * self.q[(j, k)]
            }
        });
        Self {
            q,
            edge_constant: self.edge_constant,
        }
    }

    /// Relabels node `j` as `perm[j]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let p = self.p();
        let mut q = DMatrix::from_element(p, p, f64::NEG_INFINITY);
        for j in 0..p {
            for k in 0..p {
                q[(perm[j], perm[k])] = self.q[(j, k)];
            }
        }
        Self {
            q,
            edge_constant: self.edge_constant,
        }
    }
}

/// `log C(n) = -[n log 2 + log Γ((n+1)/2) + (n-1)/2 · log π]`.
pub fn gdp_log_normalizer(n: usize) -> f64 {
    let n = n as f64;
    -(n * 2f64.ln() + ln_gamma((n + 1.0) / 2.0) + 0.5 * (n - 1.0) * PI.ln())
}

/// Log of the multivariate generalized double Pareto marginal density of an
/// `n`-vector at Euclidean norm `d`, with the local scales integrated out:
/// `C(n) Γ(α+n)/Γ(α) τ⁻ⁿ (1 + d/τ)^-(α+n)`.
pub fn gdp_log_marginal(d: f64, n: usize, alpha: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be non-negative, got {d}")));
    }
    Ok(gdp_edge_constant(n, alpha, tau) + gdp_kernel(d, n, alpha, tau))
}

/// Terms of the GDP log-density that do not depend on the distance.
#[inline]
pub fn gdp_edge_constant(n: usize, alpha: f64, tau: f64) -> f64 {
    let nf = n as f64;
    gdp_log_normalizer(n) + ln_gamma(alpha + nf) - ln_gamma(alpha) - nf * tau.ln()
}

/// `-(α+n) log(1 + d/τ)`.
#[inline]
pub fn gdp_kernel(d: f64, n: usize, alpha: f64, tau: f64) -> f64 {
    -(alpha + n as f64) * (d / tau).ln_1p()
}

/// `μ_τ = min_{j≠k} ‖y_j - y_k‖₂ / n`.
pub fn empirical_tau_prior_mean(data: &DataMatrix) -> Result<f64> {
    mu_tau_from_distances(&data.distances())
}

pub fn mu_tau_from_distances(dist: &PairwiseDistances) -> Result<f64> {
    let p = dist.p();
    if p < 2 {
        return Err(Error::InvalidParameter("need at least two variables".into()));
    }
    let mut best = (f64::INFINITY, 0, 1);
    for j in 0..p {
        for k in (j + 1)..p {
            let d = dist.get(j, k);
            if d < best.0 {
                best = (d, j, k);
            }
        }
    }
    if !(best.0 > 0.0) {
        return Err(Error::DuplicateColumns(best.1, best.2));
    }
    Ok(best.0 / dist.n() as f64)
}

/// `q_jk = -(α+n) log(1 + ‖y_j - y_k‖₂/τ) + log η_jk`.
///
/// The distance-free terms of the edge density are kept in
/// [`LogWeightMatrix::edge_constant`]; they cancel in tree posteriors.
pub fn assemble_log_weights(
    data: &DataMatrix,
    params: &ShrinkageParams,
    prior: &TreePrior,
) -> Result<LogWeightMatrix> {
    log_weights_from_distances(&data.distances(), params, prior)
}

pub fn log_weights_from_distances(
    dist: &PairwiseDistances,
    params: &ShrinkageParams,
    prior: &TreePrior,
) -> Result<LogWeightMatrix> {
    params.validate()?;
    let p = dist.p();
    prior.validate(p)?;
    let n = dist.n();
    let mut q = DMatrix::from_element(p, p, f64::NEG_INFINITY);
    for j in 0..p {
        for k in (j + 1)..p {
            let v = gdp_kernel(dist.get(j, k), n, params.alpha, params.tau) + prior.log_eta(j, k);
            q[(j, k)] = v;
            q[(k, j)] = v;
        }
    }
    Ok(LogWeightMatrix {
        q,
        edge_constant: gdp_edge_constant(n, params.alpha, params.tau),
    })
}

/// `log z(η)` for `η_jk = v_j v_k`: `(p-2) log Σv + Σ log v`.
pub fn degree_prior_log_normalizer(v: &[f64]) -> Result<f64> {
    let p = v.len();
    if p < 2 {
        return Err(Error::InvalidParameter("need at least two nodes".into()));
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter("degree weights must be positive".into()));
    }
    let sum: f64 = v.iter().sum();
    Ok((p as f64 - 2.0) * sum.ln() + v.iter().map(|x| x.ln()).sum::<f64>())
}
