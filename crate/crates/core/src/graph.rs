//! Spanning trees and their incidence-matrix algebra.
//!
//! A tree over `p` nodes is stored as `p - 1` canonical edges `(j, k)` with
//! `j < k` (0-based internally). [`IncidenceMatrix`] keeps the node-to-edge
//! matrix `B` implicitly through the edge list, together with the cached
//! Gram inverse `(BᵀB)⁻¹`. From that cache the cut induced by removing any
//! edge is read off a single projection, without traversing the graph, and
//! the cache is maintained under single-column replacements with block
//! updates instead of re-inversion.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected edge with `0 <= j < k < p`.
pub type Edge = (usize, usize);

/// Orders the endpoints so the smaller index comes first.
#[inline]
pub fn canonical(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// A spanning tree over `p` labelled nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpanningTree {
    p: usize,
    edges: Vec<Edge>,
}

impl SpanningTree {
    /// Validates and canonicalizes an edge list. Edge order is preserved.
    pub fn new(p: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if p == 0 {
            return Err(Error::NotATree("a tree needs at least one node".into()));
        }
        if edges.len() != p - 1 {
            return Err(Error::NotATree(format!(
                "expected {} edges for {} nodes, got {}",
                p - 1,
                p,
                edges.len()
            )));
        }
        let mut seen = BTreeSet::new();
        let mut uf = UnionFind::new(p);
        let mut canon = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= p || b >= p {
                return Err(Error::NotATree(format!(
                    "edge ({a}, {b}) references a node outside 0..{p}"
                )));
            }
            if a == b {
                return Err(Error::NotATree(format!("self-loop at node {a}")));
            }
            let e = canonical(a, b);
            if !seen.insert(e) {
                return Err(Error::NotATree(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            if !uf.union(e.0, e.1) {
                return Err(Error::NotATree(format!(
                    "edge ({}, {}) closes a cycle",
                    e.0, e.1
                )));
            }
            canon.push(e);
        }
        // p - 1 acyclic edges over p nodes are necessarily connected.
        Ok(Self { p, edges: canon })
    }

    pub(crate) fn from_edges_unchecked(p: usize, edges: Vec<Edge>) -> Self {
        debug_assert!(Self::new(p, edges.clone()).is_ok());
        Self { p, edges }
    }

    /// Path 0 - 1 - ... - (p-1).
    pub fn path(p: usize) -> Self {
        Self::from_edges_unchecked(p, (1..p).map(|k| (k - 1, k)).collect())
    }

    /// Star centred at `center`.
    pub fn star(p: usize, center: usize) -> Self {
        assert!(center < p);
        Self::from_edges_unchecked(
            p,
            (0..p).filter(|&l| l != center).map(|l| canonical(center, l)).collect(),
        )
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_set(&self) -> BTreeSet<Edge> {
        self.edges.iter().copied().collect()
    }

    /// Edges in lexicographic order; two trees are equal as graphs iff these match.
    pub fn sorted_edges(&self) -> Vec<Edge> {
        let mut e = self.edges.clone();
        e.sort_unstable();
        e
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        let e = canonical(a, b);
        self.edges.contains(&e)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.p];
        for &(j, k) in &self.edges {
            d[j] += 1;
            d[k] += 1;
        }
        d
    }

    /// Binary symmetric adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.p, self.p);
        for &(j, k) in &self.edges {
            a[(j, k)] = 1.0;
            a[(k, j)] = 1.0;
        }
        a
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.p];
        for &(j, k) in &self.edges {
            nb[j].push(k);
            nb[k].push(j);
        }
        nb
    }

    /// Weighted Laplacian `D - A` where edge `s` carries weight `weights[s]`.
    pub fn weighted_laplacian(&self, weights: &[f64]) -> DMatrix<f64> {
        assert_eq!(weights.len(), self.edges.len());
        let mut l = DMatrix::zeros(self.p, self.p);
        for (&(j, k), &w) in self.edges.iter().zip(weights) {
            l[(j, k)] -= w;
            l[(k, j)] -= w;
            l[(j, j)] += w;
            l[(k, k)] += w;
        }
        l
    }

    /// Edges on the unique tree path between `a` and `b`.
    pub fn path_between(&self, a: usize, b: usize) -> Vec<Edge> {
        let nb = self.neighbors();
        let mut prev = vec![usize::MAX; self.p];
        let mut stack = vec![a];
        prev[a] = a;
        while let Some(u) = stack.pop() {
            if u == b {
                break;
            }
            for &v in &nb[u] {
                if prev[v] == usize::MAX {
                    prev[v] = u;
                    stack.push(v);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = b;
        while cur != a {
            let up = prev[cur];
            out.push(canonical(up, cur));
            cur = up;
        }
        out
    }

    /// Relabels node `l` as `perm[l]`; edge order is kept.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.p);
        Self::from_edges_unchecked(
            self.p,
            self.edges.iter().map(|&(j, k)| canonical(perm[j], perm[k])).collect(),
        )
    }

    /// Returns the tree with edge `s` replaced by `edge`, validated.
    pub fn with_swap(&self, s: usize, edge: (usize, usize)) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges[s] = edge;
        Self::new(self.p, edges)
    }
}

/// Two sides of the cut obtained by deleting one tree edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutPartition {
    /// Side containing the smaller endpoint of `cut_edge`, sorted.
    pub v1: Vec<usize>,
    /// Side containing the larger endpoint, sorted.
    pub v2: Vec<usize>,
    pub cut_edge: Edge,
}

/// Incidence matrix of a spanning tree with its cached Gram inverse.
///
/// Column `s` of `B` has `+1` at the smaller endpoint of edge `s` and `-1`
/// at the larger one. `B` itself is never stored densely; every product
/// with it runs over the edge list.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    p: usize,
    edges: Vec<Edge>,
    gram_inv: DMatrix<f64>,
    swaps_since_refresh: usize,
    refreshes: usize,
}

impl IncidenceMatrix {
    /// Builds `B` for a validated tree and inverts its Gram matrix.
    pub fn new(tree: &SpanningTree) -> Self {
        let mut inc = Self {
            p: tree.p,
            edges: tree.edges.clone(),
            gram_inv: DMatrix::zeros(0, 0),
            swaps_since_refresh: 0,
            refreshes: 0,
        };
        inc.refresh();
        inc.refreshes = 0;
        inc
    }

    /// Validates the edge list first.
    pub fn from_edges(p: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Ok(Self::new(&SpanningTree::new(p, edges)?))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, s: usize) -> Edge {
        self.edges[s]
    }

    pub fn tree(&self) -> SpanningTree {
        SpanningTree::from_edges_unchecked(self.p, self.edges.clone())
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// Number of full recomputations triggered since construction.
    pub fn refresh_count(&self) -> usize {
        self.refreshes
    }

    /// Dense `p x (p-1)` incidence matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.p, self.edges.len());
        for (s, &(j, k)) in self.edges.iter().enumerate() {
            b[(j, s)] = 1.0;
            b[(k, s)] = -1.0;
        }
        b
    }

    /// `BᵀB`, assembled from shared endpoints.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.edges.len();
        let mut g = DMatrix::zeros(m, m);
        for (t, &et) in self.edges.iter().enumerate() {
            for (u, &eu) in self.edges.iter().enumerate() {
                g[(t, u)] = column_dot(et, eu);
            }
        }
        g
    }

    /// Recomputes `(BᵀB)⁻¹` from scratch.
    pub fn refresh(&mut self) {
        let m = self.edges.len();
        self.gram_inv = if m == 0 {
            DMatrix::zeros(0, 0)
        } else {
            self.gram()
                .cholesky()
                .expect("Gram matrix of a spanning tree is positive definite")
                .inverse()
        };
        self.swaps_since_refresh = 0;
        self.refreshes += 1;
    }

    fn check_index(&self, s: usize) -> Result<()> {
        if s >= self.edges.len() {
            return Err(Error::EdgeIndex {
                index: s,
                edges: self.edges.len(),
            });
        }
        Ok(())
    }

    fn pivot(&self, s: usize) -> Result<f64> {
        let mss = self.gram_inv[(s, s)];
        if !(mss > 0.0) {
            return Err(Error::NonPositivePivot(mss));
        }
        Ok(mss)
    }

    /// `B₍₋s₎ᵀ x` for `x = e_a - e_b`, with entry `s` zeroed.
    fn contrast_products(&self, s: usize, (a, b): Edge) -> DVector<f64> {
        DVector::from_iterator(
            self.edges.len(),
            self.edges.iter().enumerate().map(|(t, &e)| {
                if t == s {
                    0.0
                } else {
                    column_dot(e, (a, b))
                }
            }),
        )
    }

    /// `(B₍₋s₎ᵀB₍₋s₎)⁻¹ u` via the rank-one downdate `M - M_s M_sᵀ / M_ss`,
    /// without forming the reduced inverse.
    fn reduced_solve(&self, s: usize, mss: f64, u: &DVector<f64>) -> DVector<f64> {
        let col = self.gram_inv.column(s);
        let mut w = &self.gram_inv * u;
        let scale = col.dot(u) / mss;
        w.axpy(-scale, &col, 1.0);
        w[s] = 0.0;
        w
    }

    /// `(B₍₋s₎ᵀB₍₋s₎)⁻¹` as a `(p-2) x (p-2)` matrix, read from the cached
    /// inverse by block extraction. Rows and columns keep edge order with
    /// `s` removed.
    pub fn reduced_gram_inverse(&self, s: usize) -> Result<DMatrix<f64>> {
        self.check_index(s)?;
        let mss = self.pivot(s)?;
        let m = self.edges.len();
        let idx: Vec<usize> = (0..m).filter(|&t| t != s).collect();
        let ms = self.gram_inv.column(s);
        Ok(DMatrix::from_fn(m - 1, m - 1, |a, b| {
            let (ia, ib) = (idx[a], idx[b]);
            self.gram_inv[(ia, ib)] - ms[ia] * ms[ib] / mss
        }))
    }

    /// `β_s = (I - B₍₋s₎(B₍₋s₎ᵀB₍₋s₎)⁻¹B₍₋s₎ᵀ) B_s`.
    pub fn projection(&self, s: usize) -> Result<DVector<f64>> {
        self.check_index(s)?;
        let mss = self.pivot(s)?;
        let es = self.edges[s];
        let c = self.contrast_products(s, es);
        let w = self.reduced_solve(s, mss, &c);
        let mut beta = DVector::zeros(self.p);
        beta[es.0] = 1.0;
        beta[es.1] = -1.0;
        for (t, &(j, k)) in self.edges.iter().enumerate() {
            if t != s {
                beta[j] -= w[t];
                beta[k] += w[t];
            }
        }
        Ok(beta)
    }

    /// Marks `side[l] = true` for nodes on the same side as the smaller
    /// endpoint of edge `s`.
    pub fn cut_sides(&self, s: usize) -> Result<Vec<bool>> {
        let beta = self.projection(s)?;
        let (j, k) = self.edges[s];
        let (bj, bk) = (beta[j], beta[k]);
        let gap = (bj - bk).abs();
        let mut worst = 0.0f64;
        let side: Vec<bool> = beta
            .iter()
            .map(|&b| {
                let (dj, dk) = ((b - bj).abs(), (b - bk).abs());
                worst = worst.max(dj.min(dk));
                dj < dk
            })
            .collect();
        if !(gap > 0.0) || worst > 1e-6 * gap {
            return Err(Error::CorruptedProjection(worst));
        }
        Ok(side)
    }

    /// Cut partition of edge `s` from the projection `β_s`.
    pub fn cut_partition(&self, s: usize) -> Result<CutPartition> {
        let side = self.cut_sides(s)?;
        let (mut v1, mut v2) = (Vec::new(), Vec::new());
        for (l, &in_first) in side.iter().enumerate() {
            if in_first {
                v1.push(l);
            } else {
                v2.push(l);
            }
        }
        Ok(CutPartition {
            v1,
            v2,
            cut_edge: self.edges[s],
        })
    }

    /// Replaces edge `s` by `new_edge` and updates `(BᵀB)⁻¹` with the block
    /// formulas. Rejects edges that do not cross the cut of `s`.
    pub fn swap_edge(&mut self, s: usize, new_edge: (usize, usize)) -> Result<()> {
        self.check_index(s)?;
        let (a, b) = new_edge;
        if a >= self.p || b >= self.p || a == b {
            return Err(Error::EdgeDoesNotCross(a, b));
        }
        let side = self.cut_sides(s)?;
        if side[a] == side[b] {
            return Err(Error::EdgeDoesNotCross(a, b));
        }
        self.swap_edge_unchecked(s, canonical(a, b))
    }

    /// As [`swap_edge`](Self::swap_edge) when the caller already knows that
    /// `new_edge` crosses the cut.
    pub(crate) fn swap_edge_unchecked(&mut self, s: usize, new_edge: Edge) -> Result<()> {
        if self.edges[s] == new_edge {
            return Ok(());
        }
        let mss = self.pivot(s)?;
        let u = self.contrast_products(s, new_edge);
        let w = self.reduced_solve(s, mss, &u);
        // ‖P b*‖² with ‖b*‖² = 2
        let schur = 2.0 - u.dot(&w);
        if !(schur > 0.0) {
            return Err(Error::NonPositivePivot(schur));
        }
        let m22 = 1.0 / schur;
        let ms: Vec<f64> = self.gram_inv.column(s).iter().copied().collect();
        let m = self.edges.len();
        {
            let data = self.gram_inv.as_mut_slice();
            for c in 0..m {
                let a1 = ms[c] / mss;
                let a2 = m22 * w[c];
                let colm = &mut data[c * m..(c + 1) * m];
                for (r, x) in colm.iter_mut().enumerate() {
                    *x += a2 * w[r] - a1 * ms[r];
                }
            }
        }
        for t in 0..m {
            let v = -m22 * w[t];
            self.gram_inv[(t, s)] = v;
            self.gram_inv[(s, t)] = v;
        }
        self.gram_inv[(s, s)] = m22;
        self.edges[s] = new_edge;
        self.swaps_since_refresh += 1;
        if self.swaps_since_refresh >= self.p {
            self.refresh();
        }
        Ok(())
    }

    /// Max-abs deviation of the cached inverse from a fresh inversion.
    pub fn drift(&self) -> f64 {
        let mut fresh = self.clone();
        fresh.refresh();
        (&self.gram_inv - &fresh.gram_inv).amax()
    }
}

/// Inner product of incidence columns for edges `x` and `y`.
#[inline]
fn column_dot((xj, xk): Edge, (yj, yk): Edge) -> f64 {
    let mut v = 0.0;
    if xj == yj {
        v += 1.0;
    }
    if xj == yk {
        v -= 1.0;
    }
    if xk == yj {
        v -= 1.0;
    }
    if xk == yk {
        v += 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_tree(p: usize, rng: &mut impl Rng) -> SpanningTree {
        // random attachment: node l joins a uniformly chosen earlier node
        let mut perm: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let edges = (1..p)
            .map(|l| canonical(perm[l], perm[rng.random_range(0..l)]))
            .collect();
        SpanningTree::new(p, edges).unwrap()
    }

    fn traversal_sides(tree: &SpanningTree, s: usize) -> Vec<bool> {
        let (j, _) = tree.edges()[s];
        let mut side = vec![false; tree.p()];
        let mut stack = vec![j];
        side[j] = true;
        while let Some(u) = stack.pop() {
            for (t, &(a, b)) in tree.edges().iter().enumerate() {
                if t == s {
                    continue;
                }
                let other = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !side[other] {
                    side[other] = true;
                    stack.push(other);
                }
            }
        }
        side
    }

    #[test]
    fn path_incidence_matches_definition() {
        let inc = IncidenceMatrix::new(&SpanningTree::path(3));
        let b = inc.matrix();
        let expect = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 1.0, 0.0, -1.0]);
        assert_eq!(b, expect);
    }

    #[test]
    fn star_incidence_has_center_row_of_ones() {
        let inc = IncidenceMatrix::new(&SpanningTree::star(4, 0));
        let b = inc.matrix();
        for s in 0..3 {
            assert_eq!(b[(0, s)], 1.0);
            assert_eq!(b.column(s).iter().filter(|&&x| x == -1.0).count(), 1);
            assert_eq!(b.column(s).sum(), 0.0);
        }
    }

    #[test]
    fn rejects_non_trees() {
        assert!(SpanningTree::new(4, vec![(0, 1), (1, 2)]).is_err());
        assert!(SpanningTree::new(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(SpanningTree::new(4, vec![(0, 1), (1, 0), (2, 3)]).is_err());
        assert!(SpanningTree::new(4, vec![(0, 1), (0, 1), (2, 3)]).is_err());
        assert!(SpanningTree::new(4, vec![(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(SpanningTree::new(3, vec![(0, 0), (1, 2)]).is_err());
        assert!(SpanningTree::new(3, vec![(0, 5), (1, 2)]).is_err());
        assert!(IncidenceMatrix::from_edges(4, vec![(0, 1), (2, 3), (3, 2)]).is_err());
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in 2..30 {
            let t = random_tree(p, &mut rng);
            assert_eq!(t.degrees().iter().sum::<usize>(), 2 * (p - 1));
        }
    }

    #[test]
    fn random_tree_incidence_has_full_column_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inc = IncidenceMatrix::new(&random_tree(50, &mut rng));
        let sv = inc.matrix().singular_values();
        let rank = sv.iter().filter(|&&x| x > 1e-9).count();
        assert_eq!(rank, 49);
    }

    #[test]
    fn gram_inverse_is_an_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inc = IncidenceMatrix::new(&random_tree(40, &mut rng));
        let prod = inc.gram_inverse() * inc.gram();
        let err = (prod - DMatrix::identity(39, 39)).amax();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn leaf_cut_on_path() {
        let inc = IncidenceMatrix::new(&SpanningTree::path(3));
        let cut = inc.cut_partition(0).unwrap();
        assert_eq!(cut.v1, vec![0]);
        assert_eq!(cut.v2, vec![1, 2]);
        assert_eq!(cut.cut_edge, (0, 1));
    }

    #[test]
    fn star_cut_isolates_leaf() {
        let inc = IncidenceMatrix::new(&SpanningTree::star(5, 0));
        // edge (1,4) in 1-based labels is (0,3)
        let s = inc.edges().iter().position(|&e| e == (0, 3)).unwrap();
        let cut = inc.cut_partition(s).unwrap();
        assert_eq!(cut.v1, vec![0, 1, 2, 4]);
        assert_eq!(cut.v2, vec![3]);
    }

    #[test]
    fn projection_is_orthogonal_to_other_columns_and_sums_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let inc = IncidenceMatrix::new(&random_tree(30, &mut rng));
            let b = inc.matrix();
            for s in 0..29 {
                let beta = inc.projection(s).unwrap();
                assert!(beta.sum().abs() < 1e-8);
                for t in (0..29).filter(|&t| t != s) {
                    assert!(b.column(t).dot(&beta).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn projection_cuts_match_traversal_for_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = rng.random_range(2..120);
            let tree = random_tree(p, &mut rng);
            let inc = IncidenceMatrix::new(&tree);
            for s in 0..p - 1 {
                assert_eq!(inc.cut_sides(s).unwrap(), traversal_sides(&tree, s));
            }
        }
    }

    #[test]
    fn reduced_inverse_scalar_case() {
        let inc = IncidenceMatrix::new(&SpanningTree::path(3));
        let r = inc.reduced_gram_inverse(1).unwrap();
        // remaining column (1,-1,0) has Gram 2
        assert!((r[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn reduced_inverse_matches_direct_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inc = IncidenceMatrix::new(&random_tree(20, &mut rng));
        let b = inc.matrix();
        for s in 0..19 {
            let keep: Vec<usize> = (0..19).filter(|&t| t != s).collect();
            let bs = b.select_columns(&keep);
            let direct = (bs.transpose() * &bs).try_inverse().unwrap();
            let fast = inc.reduced_gram_inverse(s).unwrap();
            assert!((direct - fast).amax() < 1e-10);
        }
    }

    #[test]
    fn three_node_swap_yields_star() {
        let mut inc = IncidenceMatrix::new(&SpanningTree::path(3));
        inc.swap_edge(1, (0, 2)).unwrap();
        assert_eq!(inc.tree().sorted_edges(), vec![(0, 1), (0, 2)]);
        assert!(inc.drift() < 1e-12);
    }

    #[test]
    fn swap_rejects_edge_within_one_side() {
        let mut inc = IncidenceMatrix::new(&SpanningTree::path(4));
        // cutting (2,3) leaves {0,1,2} | {3}; (0,2) stays inside the first side
        assert!(matches!(
            inc.swap_edge(2, (0, 2)),
            Err(Error::EdgeDoesNotCross(0, 2))
        ));
    }

    #[test]
    fn swap_then_swap_back_restores_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut inc = IncidenceMatrix::new(&random_tree(25, &mut rng));
        let before = inc.gram_inverse().clone();
        let old = inc.edge(7);
        let cut = inc.cut_partition(7).unwrap();
        let new = canonical(cut.v1[cut.v1.len() - 1], cut.v2[0]);
        let new = if new == old {
            canonical(cut.v1[0], cut.v2[cut.v2.len() - 1])
        } else {
            new
        };
        inc.swap_edge(7, new).unwrap();
        inc.swap_edge(7, old).unwrap();
        assert!((inc.gram_inverse() - before).amax() < 1e-10);
    }

    #[test]
    fn many_swaps_keep_inverse_accurate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = 50;
        let mut inc = IncidenceMatrix::new(&random_tree(p, &mut rng));
        for _ in 0..10 * p {
            let s = rng.random_range(0..p - 1);
            let cut = inc.cut_partition(s).unwrap();
            let a = cut.v1[rng.random_range(0..cut.v1.len())];
            let b = cut.v2[rng.random_range(0..cut.v2.len())];
            inc.swap_edge(s, (a, b)).unwrap();
            assert!(inc.tree().edges().len() == p - 1);
        }
        assert!(inc.drift() <= 1e-8);
        assert!(SpanningTree::new(p, inc.edges().to_vec()).is_ok());
    }

    #[test]
    fn weighted_laplacian_equals_b_psi_inv_bt() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tree = random_tree(15, &mut rng);
        let sigma: Vec<f64> = (0..14).map(|_| rng.random_range(0.1..3.0)).collect();
        let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
        let b = IncidenceMatrix::new(&tree).matrix();
        let psi_inv = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
        let via_b = &b * psi_inv * b.transpose();
        assert!((tree.weighted_laplacian(&w) - via_b).amax() < 1e-12);
    }

    #[test]
    fn path_between_follows_tree() {
        let t = SpanningTree::path(5);
        let mut path = t.path_between(0, 3);
        path.sort_unstable();
        assert_eq!(path, vec![(0, 1), (1, 2), (2, 3)]);
        assert!(t.path_between(2, 2).is_empty());
    }
}
