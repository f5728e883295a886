//! Conditional posterior mode of the tree and related point estimates.
//!
//! The mode maximizes `Σ_{(j,k)∈T} q_jk`, i.e. it is the minimum spanning
//! tree under edge cost `-q`. Prim's algorithm is the primary solver;
//! Kruskal is kept as an independent cross-check.

use nalgebra::DMatrix;

use crate::distribution::{enumerate_trees, MAX_ENUMERATION_NODES};
use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, SpanningTree, UnionFind};
use crate::weights::{
    log_weights_from_distances, mu_tau_from_distances, DataMatrix, LogWeightMatrix, PairwiseDistances,
    ShrinkageParams, TreePrior,
};

/// `true` when candidate `(qa, ea)` beats `(qb, eb)`: larger score first,
/// then the lexicographically smaller canonical edge.
#[inline]
fn better(qa: f64, ea: Edge, qb: f64, eb: Edge) -> bool {
    qa > qb || (qa == qb && ea < eb)
}

/// Prim's algorithm grown from node 0, maximizing total `q`.
///
/// Ties are broken towards the lexicographically smallest edge.
pub fn prim_mode(q: &LogWeightMatrix) -> Result<SpanningTree> {
    let p = q.p();
    if p == 0 {
        return Err(Error::InvalidParameter("empty weight matrix".into()));
    }
    let mut in_tree = vec![false; p];
    in_tree[0] = true;
    // best connection of every outside node into the tree
    let mut best_q = vec![f64::NEG_INFINITY; p];
    let mut best_edge: Vec<Edge> = vec![(usize::MAX, usize::MAX); p];
    for v in 1..p {
        best_q[v] = q.get(0, v);
        best_edge[v] = (0, v);
    }
    let mut edges = Vec::with_capacity(p.saturating_sub(1));
    for _ in 1..p {
        let mut pick: Option<usize> = None;
        for v in 0..p {
            if in_tree[v] {
                continue;
            }
            pick = match pick {
                None => Some(v),
                Some(u) if better(best_q[v], best_edge[v], best_q[u], best_edge[u]) => Some(v),
                keep => keep,
            };
        }
        let v = pick.expect("an outside node remains");
        if best_q[v] == f64::NEG_INFINITY {
            return Err(Error::DisconnectedSupport(v));
        }
        in_tree[v] = true;
        edges.push(best_edge[v]);
        for u in 0..p {
            if in_tree[u] {
                continue;
            }
            let cand = q.get(v, u);
            let e = canonical(v, u);
            if better(cand, e, best_q[u], best_edge[u]) {
                best_q[u] = cand;
                best_edge[u] = e;
            }
        }
    }
    Ok(SpanningTree::from_edges_unchecked(p, edges))
}

/// Kruskal's algorithm on cost `-q`, same tie rule as [`prim_mode`].
pub fn kruskal_mode(q: &LogWeightMatrix) -> Result<SpanningTree> {
    let p = q.p();
    let mut cand: Vec<(f64, Edge)> = Vec::with_capacity(p * (p - 1) / 2);
    for j in 0..p {
        for k in (j + 1)..p {
            let v = q.get(j, k);
            if v.is_finite() {
                cand.push((v, (j, k)));
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut uf = UnionFind::new(p);
    let mut edges = Vec::with_capacity(p.saturating_sub(1));
    for (_, (j, k)) in cand {
        if uf.union(j, k) {
            edges.push((j, k));
            if edges.len() + 1 == p {
                break;
            }
        }
    }
    if edges.len() + 1 != p {
        let root = uf.find(0);
        let lost = (0..p).find(|&l| uf.find(l) != root).unwrap_or(0);
        return Err(Error::DisconnectedSupport(lost));
    }
    Ok(SpanningTree::from_edges_unchecked(p, edges))
}

/// Minimum spanning tree of a symmetric cost matrix.
pub fn minimum_spanning_tree(cost: &DMatrix<f64>) -> Result<SpanningTree> {
    let q = LogWeightMatrix::from_matrix(-cost)?;
    prim_mode(&q)
}

/// Plug-in global scale `τ̂ = α Σ_{(j,k)∈T} ‖y_j - y_k‖₂ / [n(p-1)]`.
///
/// Edge distances are summed in ascending order so the value does not
/// depend on how nodes or edges are labelled.
pub fn tau_hat(tree: &SpanningTree, dist: &PairwiseDistances, alpha: f64) -> f64 {
    let p = tree.p();
    if p < 2 {
        return f64::NAN;
    }
    let mut d: Vec<f64> = tree.edges().iter().map(|&(j, k)| dist.get(j, k)).collect();
    d.sort_by(f64::total_cmp);
    alpha * d.iter().sum::<f64>() / (dist.n() as f64 * (p - 1) as f64)
}

/// `W₀[j,k] = Σ_jj + Σ_kk - 2 Σ_jk` for a positive-definite `Σ`.
pub fn covariance_dissimilarity(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    if sigma.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(DMatrix::from_fn(p, p, |j, k| {
        if j == k {
            0.0
        } else {
            sigma[(j, j)] + sigma[(k, k)] - 2.0 * sigma[(j, k)]
        }
    }))
}

/// Minimum spanning tree of `W₀` derived from a population covariance.
pub fn oracle_tree(sigma: &DMatrix<f64>) -> Result<SpanningTree> {
    minimum_spanning_tree(&covariance_dissimilarity(sigma)?)
}

/// Smallest gap between an edge outside every minimum spanning tree and the
/// tree edges on its path.
#[derive(Debug, Clone, PartialEq)]
pub struct Separability {
    pub delta: f64,
    /// `(h, l, j, k)`: off-tree edge `(h, l)` and path edge `(j, k)`
    /// attaining `delta`. `None` when no off-tree edges exist (`p <= 2`).
    pub witness: Option<(Edge, Edge)>,
    /// Number of minimum spanning trees considered.
    pub mst_count: usize,
}

/// Separability constant of a weight matrix.
///
/// For `p <= 8` every minimum spanning tree is found by enumeration; beyond
/// that only the tree returned by Prim is used, and ties that indicate
/// several minimum trees are reported through `log::warn!`.
pub fn separability_delta(w: &DMatrix<f64>) -> Result<Separability> {
    let p = w.nrows();
    if w.ncols() != p {
        return Err(Error::Dimension("weight matrix must be square".into()));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite".into()));
    }
    let msts: Vec<SpanningTree> = if p <= MAX_ENUMERATION_NODES {
        let trees = enumerate_trees(p)?;
        let weight = |t: &SpanningTree| t.edges().iter().map(|&(j, k)| w[(j, k)]).sum::<f64>();
        let best = trees.iter().map(weight).fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * best.abs().max(1.0);
        trees.into_iter().filter(|t| weight(t) <= best + tol).collect()
    } else {
        vec![minimum_spanning_tree(w)?]
    };
    let mut on_some_mst = vec![false; p * p];
    for t in &msts {
        for &(j, k) in t.edges() {
            on_some_mst[j * p + k] = true;
        }
    }
    let mut out = Separability {
        delta: f64::INFINITY,
        witness: None,
        mst_count: msts.len(),
    };
    let mut tie_seen = false;
    for t in &msts {
        for h in 0..p {
            for l in (h + 1)..p {
                if on_some_mst[h * p + l] {
                    continue;
                }
                for (j, k) in t.path_between(h, l) {
                    let gap = w[(h, l)] - w[(j, k)];
                    if gap <= 0.0 {
                        tie_seen = true;
                    }
                    if gap < out.delta {
                        out.delta = gap;
                        out.witness = Some(((h, l), (j, k)));
                    }
                }
            }
        }
    }
    if tie_seen && p > MAX_ENUMERATION_NODES {
        log::warn!("weights admit several minimum spanning trees; delta computed for one of them");
    }
    Ok(out)
}

/// Mode tree of a data set together with the plug-in scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEstimate {
    pub tree: SpanningTree,
    pub tau_hat: f64,
    pub mu_tau: f64,
    /// Scale at which the mode was computed.
    pub tau_init: f64,
}

/// Conditional mode at `tau_init` (default `μ_τ`), then `τ̂` from that tree.
///
/// The degree prior is evaluated at uniform weights `v_j = 1/p`.
pub fn estimate_mode(data: &DataMatrix, prior: &TreePrior, alpha: f64, tau_init: Option<f64>) -> Result<ModeEstimate> {
    let dist = data.distances();
    let mu_tau = mu_tau_from_distances(&dist)?;
    let tau_init = tau_init.unwrap_or(mu_tau);
    let prior = match prior {
        TreePrior::Degree { alpha_dir, .. } => TreePrior::degree_uniform(data.p(), *alpha_dir),
        other => other.clone(),
    };
    let q = log_weights_from_distances(&dist, &ShrinkageParams::new(alpha, tau_init, mu_tau)?, &prior)?;
    let tree = prim_mode(&q)?;
    Ok(ModeEstimate {
        tau_hat: tau_hat(&tree, &dist, alpha),
        tree,
        mu_tau,
        tau_init,
    })
}
