//! Synthetic data generators, the correlation-thresholding baseline, edge
//! recovery metrics and the simulation studies built from them.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distribution::{marginal_connecting_probabilities, random_uniform_tree};
use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, SpanningTree};
use crate::hmm::{HmmSeries, StateSequence};
use crate::mode::{estimate_mode, oracle_tree};
use crate::sampler::{run_chain, ChainConfig};
use crate::weights::{assemble_log_weights, DataMatrix, ShrinkageParams, TreePrior};

/// Magnitude range of nonzero precision coefficients before diagonal repair.
pub const COEF_RANGE: (f64, f64) = (0.3, 0.9);
const DIAGONAL_MARGIN: f64 = 0.1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A sparse precision matrix and the structures derived from it.
#[derive(Debug, Clone)]
pub struct SparsePrecision {
    pub omega: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// Nonzero off-diagonal pattern of `omega`.
    pub g0: BTreeSet<Edge>,
    /// Minimum spanning tree of `W₀` from `sigma`.
    pub t0: SpanningTree,
}

impl SparsePrecision {
    pub fn p(&self) -> usize {
        self.omega.nrows()
    }

    /// Whether the oracle tree is a subgraph of the precision pattern.
    pub fn tree_in_graph(&self) -> bool {
        self.t0.edges().iter().all(|e| self.g0.contains(e))
    }
}

/// Random sparse positive-definite precision matrix.
///
/// Each pair is nonzero with probability `sparsity`, with a random sign and
/// magnitude uniform on [`COEF_RANGE`]. The diagonal is set to the absolute
/// row sum plus a margin, which makes the matrix strictly diagonally
/// dominant. Finally `Σ₀ = Ω₀⁻¹` is rescaled to unit variances and `Ω₀`
/// rescaled to match, which keeps the sparsity pattern.
pub fn generate_sparse_precision(p: usize, sparsity: f64, rng: &mut impl Rng) -> Result<SparsePrecision> {
    if !(sparsity > 0.0 && sparsity < 1.0) {
        return Err(Error::InvalidParameter(format!("sparsity must lie in (0,1), got {sparsity}")));
    }
    if p < 2 {
        return Err(Error::InvalidParameter("need at least two variables".into()));
    }
    let mut omega = DMatrix::zeros(p, p);
    let mut g0 = BTreeSet::new();
    for j in 0..p {
        for k in (j + 1)..p {
            if rng.random::<f64>() < sparsity {
                let mag = rng.random_range(COEF_RANGE.0..COEF_RANGE.1);
                let v = if rng.random::<bool>() { mag } else { -mag };
                omega[(j, k)] = v;
                omega[(k, j)] = v;
                g0.insert((j, k));
            }
        }
    }
    let row_abs: Vec<f64> = (0..p).map(|j| omega.row(j).iter().map(|x| x.abs()).sum()).collect();
    let mut margin = DIAGONAL_MARGIN;
    let (omega, sigma) = loop {
        let mut o = omega.clone();
        for j in 0..p {
            o[(j, j)] = row_abs[j] + margin;
        }
        if let Some(ch) = o.clone().cholesky() {
            let s = ch.inverse();
            let d: Vec<f64> = (0..p).map(|j| s[(j, j)].sqrt()).collect();
            let sigma = DMatrix::from_fn(p, p, |a, b| s[(a, b)] / (d[a] * d[b]));
            let omega = DMatrix::from_fn(p, p, |a, b| o[(a, b)] * d[a] * d[b]);
            break (omega, symmetrize(sigma));
        }
        margin *= 2.0;
    };
    let t0 = oracle_tree(&sigma)?;
    Ok(SparsePrecision { omega, sigma, g0, t0 })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `n` draws from `N(0, Σ)` as an `n x p` matrix.
pub fn sample_gaussian(sigma: &DMatrix<f64>, n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    let l = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(z * l.transpose())
}

/// Data generated along a tree: the root (node 0) is standard normal and
/// each child is `coupling · parent + noise_sd · ε`.
pub fn sample_tree_data(tree: &SpanningTree, n: usize, coupling: f64, noise_sd: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let p = tree.p();
    let nbrs = tree.neighbors();
    let mut y = DMatrix::zeros(n, p);
    let mut order = vec![0];
    let mut parent = vec![usize::MAX; p];
    parent[0] = 0;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &nbrs[v] {
            if parent[w] == usize::MAX {
                parent[w] = v;
                order.push(w);
            }
        }
    }
    for i in 0..n {
        y[(i, 0)] = rng.sample(StandardNormal);
    }
    for &v in &order[1..] {
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            y[(i, v)] = coupling * y[(i, parent[v])] + noise_sd * e;
        }
    }
    y
}

/// `p` points in the plane around three centres, returned as a `2 x p`
/// matrix (each point is a variable, its coordinates the observations).
pub fn generate_blobs(p: usize, spread: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let centres = [(0.0, 0.0), (4.0, 0.0), (2.0, 3.5)];
    let mut m = DMatrix::zeros(2, p);
    for j in 0..p {
        let (cx, cy) = centres[j % 3];
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        m[(0, j)] = cx + spread * ex;
        m[(1, j)] = cy + spread * ey;
    }
    m
}

/// Two interleaving half circles with Gaussian jitter, as a `2 x p` matrix.
pub fn generate_two_moons(p: usize, noise: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let outer = p.div_ceil(2);
    let inner = p - outer;
    let mut m = DMatrix::zeros(2, p);
    for j in 0..p {
        let (x, y) = if j < outer {
            let t = std::f64::consts::PI * j as f64 / (outer.max(2) - 1) as f64;
            (t.cos(), t.sin())
        } else {
            let t = std::f64::consts::PI * (j - outer) as f64 / (inner.max(2) - 1) as f64;
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        m[(0, j)] = x + noise * ex;
        m[(1, j)] = y + noise * ey;
    }
    m
}

/// Pearson correlation matrix of the columns of `y`.
pub fn correlation_matrix(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = y.shape();
    let mut centred = y.clone();
    for j in 0..p {
        let mean = centred.column(j).sum() / n as f64;
        centred.column_mut(j).add_scalar_mut(-mean);
    }
    let norms: Vec<f64> = (0..p).map(|j| centred.column(j).norm()).collect();
    let g = centred.tr_mul(&centred);
    DMatrix::from_fn(p, p, |a, b| g[(a, b)] / (norms[a] * norms[b]))
}

/// Pairs whose absolute empirical correlation is at least `threshold`.
pub fn thresholding_baseline(y: &DMatrix<f64>, threshold: f64) -> BTreeSet<Edge> {
    let r = correlation_matrix(y);
    let p = r.nrows();
    let mut out = BTreeSet::new();
    for j in 0..p {
        for k in (j + 1)..p {
            if r[(j, k)].abs() >= threshold {
                out.insert((j, k));
            }
        }
    }
    out
}

/// Edge-set estimator scored in recovery studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Posterior mode tree.
    Mode,
    /// Pairs with exact marginal connecting probability at `τ̂` of at least `level`.
    Mcp { level: f64 },
    /// Absolute correlation thresholding.
    Threshold { level: f64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Mode => "mode".into(),
            Method::Mcp { level } => format!("mcp_{level}"),
            Method::Threshold { level } => format!("threshold_{level}"),
        }
    }

    /// Estimated edge set from raw `n x p` observations.
    pub fn estimate(&self, y: &DMatrix<f64>, alpha: f64) -> Result<BTreeSet<Edge>> {
        match *self {
            Method::Threshold { level } => Ok(thresholding_baseline(y, level)),
            Method::Mode => {
                let data = DataMatrix::standardize(y.clone())?;
                Ok(estimate_mode(&data, &TreePrior::Uniform, alpha, None)?.tree.edge_set())
            }
            Method::Mcp { level } => {
                let data = DataMatrix::standardize(y.clone())?;
                let m = estimate_mode(&data, &TreePrior::Uniform, alpha, None)?;
                let params = ShrinkageParams::new(alpha, m.tau_hat, m.mu_tau)?;
                let q = assemble_log_weights(&data, &params, &TreePrior::Uniform)?;
                let mcp = marginal_connecting_probabilities(&q)?.mcp;
                let p = data.p();
                Ok((0..p)
                    .flat_map(|j| ((j + 1)..p).map(move |k| (j, k)))
                    .filter(|&(j, k)| mcp[(j, k)] >= level)
                    .collect())
            }
        }
    }
}

/// Error counts for one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeErrors {
    /// `|T₀ \ Ĝ|`
    pub missed_tree: usize,
    /// `|Ĝ \ G₀|`
    pub false_edges: usize,
    /// Sum of the two.
    pub combined: usize,
    pub estimated_edges: usize,
    pub true_edges: usize,
}

pub fn edge_errors(t0: &SpanningTree, g0: &BTreeSet<Edge>, estimate: &BTreeSet<Edge>) -> EdgeErrors {
    let missed_tree = t0.edges().iter().filter(|e| !estimate.contains(&canonical(e.0, e.1))).count();
    let false_edges = estimate.iter().filter(|e| !g0.contains(e)).count();
    EdgeErrors {
        missed_tree,
        false_edges,
        combined: missed_tree + false_edges,
        estimated_edges: estimate.len(),
        true_edges: g0.len(),
    }
}

/// Ground truth the recovery study draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Gaussian data with a sparse precision matrix.
    SparsePrecision { p: usize, sparsity: f64 },
    /// Data generated along a uniformly random tree; `G₀ = T₀`.
    OracleTree { p: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub seed: u64,
    pub replicates: usize,
}

/// One ground-truth instance.
#[derive(Debug, Clone)]
pub struct Truth {
    pub t0: SpanningTree,
    pub g0: BTreeSet<Edge>,
    sampler: TruthSampler,
}

#[derive(Debug, Clone)]
enum TruthSampler {
    Gaussian(DMatrix<f64>),
    Tree,
}

impl Truth {
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
        match &self.sampler {
            TruthSampler::Gaussian(sigma) => sample_gaussian(sigma, n, rng),
            TruthSampler::Tree => Ok(sample_tree_data(&self.t0, n, 1.0, 1.0, rng)),
        }
    }
}

impl SyntheticSpec {
    /// Ground truth of replicate `r`.
    pub fn truth(&self, r: usize) -> Result<Truth> {
        let mut rng = rng_for(self.seed, 2 * r as u64);
        match self.kind {
            SyntheticKind::SparsePrecision { p, sparsity } => {
                let sp = generate_sparse_precision(p, sparsity, &mut rng)?;
                if !sp.tree_in_graph() {
                    log::info!("replicate {r}: oracle tree is not contained in the precision graph");
                }
                Ok(Truth {
                    t0: sp.t0,
                    g0: sp.g0,
                    sampler: TruthSampler::Gaussian(sp.sigma),
                })
            }
            SyntheticKind::OracleTree { p } => {
                let t0 = random_uniform_tree(p, &mut rng);
                Ok(Truth {
                    g0: t0.edge_set(),
                    t0,
                    sampler: TruthSampler::Tree,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub n: usize,
    pub replicate: usize,
    pub method: String,
    #[serde(flatten)]
    pub errors: EdgeErrors,
}

/// Mean and normal-approximation 95% interval of the combined error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub n: usize,
    pub method: String,
    pub mean_missed_tree: f64,
    pub mean_false_edges: f64,
    pub mean_combined: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
    pub summary: Vec<RecoverySummary>,
}

/// Mean and half-width of the normal 95% interval.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.959_963_984_540_054 * (var / n).sqrt())
}

/// Scores every method on every `(n, replicate)` cell. Replicates run on
/// separate threads; each cell has its own random stream.
pub fn recovery_experiment(
    spec: &SyntheticSpec,
    methods: &[Method],
    n_grid: &[usize],
    alpha: f64,
) -> Result<RecoveryReport> {
    let per_rep: Vec<Result<Vec<RecoveryRow>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..spec.replicates)
            .map(|r| {
                scope.spawn(move || -> Result<Vec<RecoveryRow>> {
                    let truth = spec.truth(r)?;
                    let mut rows = Vec::new();
                    for (gi, &n) in n_grid.iter().enumerate() {
                        let stream = 2 * r as u64 + 1 + ((gi as u64) << 32);
                        let y = truth.sample(n, &mut rng_for(spec.seed, stream))?;
                        for m in methods {
                            let est = m.estimate(&y, alpha)?;
                            rows.push(RecoveryRow {
                                n,
                                replicate: r,
                                method: m.label(),
                                errors: edge_errors(&truth.t0, &truth.g0, &est),
                            });
                        }
                    }
                    Ok(rows)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("replicate thread panicked")).collect()
    });
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| (a.n, &a.method, a.replicate).cmp(&(b.n, &b.method, b.replicate)));
    let mut summary = Vec::new();
    for &n in n_grid {
        for m in methods {
            let label = m.label();
            let cell: Vec<&RecoveryRow> = rows.iter().filter(|r| r.n == n && r.method == label).collect();
            let comb: Vec<f64> = cell.iter().map(|r| r.errors.combined as f64).collect();
            let (mean, half) = mean_ci(&comb);
            let avg = |f: fn(&EdgeErrors) -> usize| cell.iter().map(|r| f(&r.errors) as f64).sum::<f64>() / cell.len() as f64;
            summary.push(RecoverySummary {
                n,
                method: label,
                mean_missed_tree: avg(|e| e.missed_tree),
                mean_false_edges: avg(|e| e.false_edges),
                mean_combined: mean,
                ci_low: mean - half,
                ci_high: mean + half,
                replicates: cell.len(),
            });
        }
    }
    Ok(RecoveryReport { rows, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Blobs,
    TwoMoons,
}

#[derive(Debug, Clone)]
pub struct ManifoldResult {
    /// `2 x p` coordinates.
    pub points: DMatrix<f64>,
    pub mode_tree: SpanningTree,
    pub draws: Vec<crate::sampler::PosteriorDraw>,
    /// Edge frequencies across the retained draws.
    pub mcp: DMatrix<f64>,
}

impl ManifoldResult {
    /// Pairs that appear in at least one draw, with their frequency.
    pub fn connected_pairs(&self) -> Vec<(Edge, f64)> {
        let p = self.mcp.nrows();
        (0..p)
            .flat_map(|j| ((j + 1)..p).map(move |k| (j, k)))
            .filter(|&(j, k)| self.mcp[(j, k)] > 0.0)
            .map(|(j, k)| ((j, k), self.mcp[(j, k)]))
            .collect()
    }
}

/// Samples trees over a 2-D point cloud. Coordinates are used as given:
/// two observations per variable leave nothing to standardize.
pub fn manifold_uq_experiment(kind: ManifoldKind, p: usize, seed: u64, config: &ChainConfig, alpha: f64) -> Result<ManifoldResult> {
    let mut rng = rng_for(seed, 0);
    let points = match kind {
        ManifoldKind::Blobs => generate_blobs(p, 1.0, &mut rng),
        ManifoldKind::TwoMoons => generate_two_moons(p, 0.05, &mut rng),
    };
    let data = DataMatrix::raw(points.clone());
    let mode_tree = estimate_mode(&data, &TreePrior::Uniform, alpha, config.tau_init)?.tree;
    let cfg = ChainConfig { seed, ..config.clone() };
    let out = run_chain(&data, &TreePrior::Uniform, alpha, &cfg)?;
    let mcp = out.empirical_mcp();
    Ok(ManifoldResult {
        points,
        mode_tree,
        draws: out.draws,
        mcp,
    })
}

/// Synthetic regime data for the tree HMM.
#[derive(Debug, Clone)]
pub struct HmmRegimes {
    pub trees: Vec<SpanningTree>,
    /// `trans[g]`, one per condition.
    pub trans: Vec<DMatrix<f64>>,
    pub train: Vec<HmmSeries>,
    pub train_states: Vec<StateSequence>,
    pub test: Vec<HmmSeries>,
    pub test_states: Vec<StateSequence>,
}

/// Two regimes that share `k` state trees but cycle through them in
/// opposite directions. Each time point is drawn along its state's tree
/// with unit marginal variances and edge correlation `edge_corr`.
pub fn generate_hmm_regimes(
    k: usize,
    p: usize,
    t_len: usize,
    series_per_split: usize,
    edge_corr: f64,
    seed: u64,
) -> Result<HmmRegimes> {
    if k < 2 {
        return Err(Error::InvalidParameter("need at least two states".into()));
    }
    let mut rng = rng_for(seed, 0);
    let trees: Vec<SpanningTree> = (0..k).map(|_| random_uniform_tree(p, &mut rng)).collect();
    let stay = 0.9;
    let cyc = |forward: bool| {
        DMatrix::from_fn(k, k, |i, j| {
            let next = if forward { (i + 1) % k } else { (i + k - 1) % k };
            if i == j {
                stay
            } else if j == next {
                (1.0 - stay) * 0.8
            } else {
                (1.0 - stay) * 0.2 / (k - 2).max(1) as f64
            }
        })
    };
    let mut trans = vec![cyc(true), cyc(false)];
    if k == 2 {
        // both directions coincide with two states; make the regimes differ in persistence
        trans[1] = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7]);
    }
    for t in &mut trans {
        for r in 0..k {
            let s = t.row(r).sum();
            t.row_mut(r).scale_mut(1.0 / s);
        }
    }
    let noise = (1.0 - edge_corr * edge_corr).sqrt();
    let mut make = |count: usize, offset: usize| -> Result<(Vec<HmmSeries>, Vec<StateSequence>)> {
        let mut series = Vec::new();
        let mut states = Vec::new();
        for i in 0..count {
            let g = i % 2;
            let mut z = Vec::with_capacity(t_len);
            let mut y = DMatrix::zeros(t_len, p);
            let mut cur = rng.random_range(0..k);
            for t in 0..t_len {
                if t > 0 {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let row = trans[g].row(cur);
                    cur = k - 1;
                    for (j, &pr) in row.iter().enumerate() {
                        acc += pr;
                        if u < acc {
                            cur = j;
                            break;
                        }
                    }
                }
                z.push(cur);
                let x = sample_tree_data(&trees[cur], 1, edge_corr, noise, &mut rng);
                y.row_mut(t).copy_from(&x.row(0));
            }
            series.push(HmmSeries::new(format!("s{}", offset + i), offset + i, g, y)?);
            states.push(z);
        }
        Ok((series, states))
    };
    let (train, train_states) = make(series_per_split, 0)?;
    let (test, test_states) = make(series_per_split, series_per_split)?;
    Ok(HmmRegimes {
        trees,
        trans,
        train,
        train_states,
        test,
        test_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_precision_edge_counts() {
        let mut rng = rng_for(1, 0);
        let sp = generate_sparse_precision(200, 0.03, &mut rng).unwrap();
        let e = sp.g0.len() as f64;
        // Binomial(19900, 0.03): mean 597, sd about 24
        assert!((e - 597.0).abs() < 120.0, "{e}");
        assert!(sp.omega.clone().symmetric_eigenvalues().min() > 0.0);
        let dense = generate_sparse_precision(200, 0.2, &mut rng).unwrap();
        assert!((dense.g0.len() as f64 - 3980.0).abs() < 400.0);
        assert!(dense.omega.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn sparse_precision_pattern_survives_rescaling() {
        let mut rng = rng_for(2, 0);
        let sp = generate_sparse_precision(30, 0.1, &mut rng).unwrap();
        for j in 0..30 {
            assert!((sp.sigma[(j, j)] - 1.0).abs() < 1e-12);
            for k in (j + 1)..30 {
                assert_eq!(sp.omega[(j, k)] != 0.0, sp.g0.contains(&(j, k)));
            }
        }
        let prod = &sp.omega * &sp.sigma;
        assert!((prod - DMatrix::identity(30, 30)).amax() < 1e-8);
    }

    #[test]
    fn threshold_one_is_empty_and_duplicates_connect() {
        let mut rng = rng_for(3, 0);
        let mut y = DMatrix::from_fn(40, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert!(thresholding_baseline(&y, 1.0).is_empty());
        let c = y.column(1).clone_owned();
        y.set_column(4, &c);
        assert!(thresholding_baseline(&y, 0.99).contains(&(1, 4)));
    }

    #[test]
    fn threshold_matches_direct_correlation() {
        let mut rng = rng_for(4, 0);
        let y = DMatrix::from_fn(25, 10, |_, _| rng.sample::<f64, _>(StandardNormal));
        let est = thresholding_baseline(&y, 0.2);
        for j in 0..10 {
            for k in (j + 1)..10 {
                let a: Vec<f64> = y.column(j).iter().copied().collect();
                let b: Vec<f64> = y.column(k).iter().copied().collect();
                let ma = a.iter().sum::<f64>() / 25.0;
                let mb = b.iter().sum::<f64>() / 25.0;
                let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
                let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
                let vb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum();
                let r = cov / (va * vb).sqrt();
                assert_eq!(r.abs() >= 0.2, est.contains(&(j, k)));
            }
        }
    }

    #[test]
    fn combined_error_is_sum_of_parts() {
        let t0 = SpanningTree::path(4);
        let g0: BTreeSet<Edge> = [(0, 1), (1, 2), (2, 3), (0, 3)].into_iter().collect();
        let est: BTreeSet<Edge> = [(0, 1), (0, 2), (0, 3)].into_iter().collect();
        let e = edge_errors(&t0, &g0, &est);
        assert_eq!((e.missed_tree, e.false_edges, e.combined), (2, 1, 3));
    }

    #[test]
    fn recovery_is_deterministic() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::SparsePrecision { p: 20, sparsity: 0.1 },
            seed: 5,
            replicates: 2,
        };
        let methods = [Method::Mode, Method::Threshold { level: 0.5 }];
        let a = recovery_experiment(&spec, &methods, &[20, 40], 5.0).unwrap();
        let b = recovery_experiment(&spec, &methods, &[20, 40], 5.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 8);
    }

    #[test]
    fn tree_data_follows_its_tree() {
        let mut rng = rng_for(6, 0);
        let t = random_uniform_tree(30, &mut rng);
        let y = sample_tree_data(&t, 4000, 0.8, 0.6, &mut rng);
        let r = correlation_matrix(&y);
        for &(j, k) in t.edges() {
            assert!((r[(j, k)] - 0.8).abs() < 0.05);
        }
    }

    #[test]
    fn moons_have_requested_size() {
        let mut rng = rng_for(7, 0);
        assert_eq!(generate_two_moons(41, 0.05, &mut rng).shape(), (2, 41));
        assert_eq!(generate_blobs(30, 1.0, &mut rng).shape(), (2, 30));
    }
}
