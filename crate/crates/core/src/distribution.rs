//! Exact computations over the space of spanning trees for a posterior
//! of the form `pr(T) ∝ Π_{(j,k)∈T} exp(q_jk)`.
//!
//! The partition function is `det(L_q + J/p²)` with `L_q` the Laplacian of
//! the complete graph weighted by `exp(q)`, and the marginal probability
//! that `(j,k)` is in the tree is `(Ω_jj + Ω_kk - 2Ω_jk) exp(q_jk)` with
//! `Ω = (L_q + J/p²)⁻¹`, i.e. the weight times the effective resistance
//! between `j` and `k`. The determinant comes from the Laplacian grounded at
//! node 0; effective conductances come from repeated elimination of the
//! other nodes. Both only add non-negative numbers. Scores are
//! shifted by their maximum before exponentiation; the shift is added back
//! to `log Z` and cancels in the marginals.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, SpanningTree, UnionFind};
use crate::weights::LogWeightMatrix;

/// Largest `p` accepted by [`enumerate_trees`].
pub const MAX_ENUMERATION_NODES: usize = 8;

/// Exact posterior summaries of a log-weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePosteriorSummary {
    pub log_z: f64,
    /// Symmetric matrix of marginal connecting probabilities, zero diagonal.
    pub mcp: DMatrix<f64>,
    /// Constant subtracted from `q` before exponentiation.
    pub shift: f64,
}

/// Shifted edge weights `exp(q - c)` and the pivots of the Laplacian
/// grounded at node 0.
struct Factorized {
    weights: DMatrix<f64>,
    pivots: Vec<f64>,
    shift: f64,
}

fn check_support(q: &LogWeightMatrix) -> Result<()> {
    let p = q.p();
    let mut uf = UnionFind::new(p);
    for j in 0..p {
        for k in (j + 1)..p {
            if q.get(j, k).is_finite() {
                uf.union(j, k);
            }
        }
    }
    let root = uf.find(0);
    match (1..p).find(|&l| uf.find(l) != root) {
        Some(l) => Err(Error::DisconnectedSupport(l)),
        None => Ok(()),
    }
}

// Gaussian elimination on the grounded Laplacian that only ever adds
// non-negative numbers: each pivot is the sum of the remaining edge weights
// plus the weight to ground, so nothing cancels even when the weights span
// many orders of magnitude. `det = Π pivots` equals `det(L + J/p²)`.
fn factorize(q: &LogWeightMatrix) -> Result<Factorized> {
    let p = q.p();
    check_support(q)?;
    let shift = q.max_finite().unwrap_or(0.0);
    let weights = DMatrix::from_fn(p, p, |j, k| if j == k { 0.0 } else { (q.get(j, k) - shift).exp() });
    let m = p - 1;
    let mut w = weights.view((1, 1), (m, m)).into_owned();
    let mut ground: Vec<f64> = (1..p).map(|j| weights[(j, 0)]).collect();
    let mut pivots = Vec::with_capacity(m);
    for i in 0..m {
        let pivot: f64 = ground[i] + ((i + 1)..m).map(|l| w[(l, i)]).sum::<f64>();
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        pivots.push(pivot);
        for k in (i + 1)..m {
            let a = w[(k, i)] / pivot;
            if a == 0.0 {
                continue;
            }
            ground[k] += a * ground[i];
            for j in (i + 1)..m {
                if j != k {
                    let add = a * w[(j, i)];
                    w[(j, k)] += add;
                }
            }
        }
    }
    Ok(Factorized { weights, pivots, shift })
}

/// Eliminates the local nodes `drop` from the conductance matrix `w`
/// (zero diagonal) and returns the conductances among `keep`, in that order.
fn schur(w: &DMatrix<f64>, drop: &[usize], keep: &[usize]) -> Result<DMatrix<f64>> {
    let order: Vec<usize> = drop.iter().chain(keep).copied().collect();
    let n = order.len();
    let mut m = DMatrix::from_fn(n, n, |a, b| w[(order[a], order[b])]);
    for i in 0..drop.len() {
        let pivot: f64 = ((i + 1)..n).map(|l| m[(l, i)]).sum();
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        for k in (i + 1)..n {
            let a = m[(k, i)] / pivot;
            if a == 0.0 {
                continue;
            }
            for j in (i + 1)..n {
                if j != k {
                    let add = a * m[(j, i)];
                    m[(j, k)] += add;
                }
            }
        }
    }
    let d = drop.len();
    Ok(m.view((d, d), (keep.len(), keep.len())).into_owned())
}

fn halves(n: usize) -> Vec<std::ops::Range<usize>> {
    [0..n / 2, n / 2..n].into_iter().filter(|r| !r.is_empty()).collect()
}

// All-pairs effective conductances by recursive halving. The conductance of
// a pair is the single edge left after eliminating every other node, and the
// eliminations are shared between pairs, so the total cost stays O(p³) while
// every step is a sum of non-negative terms.
fn conductances_within(w: &DMatrix<f64>, ids: &[usize], out: &mut DMatrix<f64>) -> Result<()> {
    let s = ids.len();
    if s < 2 {
        return Ok(());
    }
    if s == 2 {
        out[(ids[0], ids[1])] = w[(0, 1)];
        out[(ids[1], ids[0])] = w[(0, 1)];
        return Ok(());
    }
    let h = s / 2;
    let (left, right): (Vec<usize>, Vec<usize>) = ((0..h).collect(), (h..s).collect());
    conductances_within(&schur(w, &right, &left)?, &ids[..h], out)?;
    conductances_within(&schur(w, &left, &right)?, &ids[h..], out)?;
    conductances_across(w, &ids[..h], &ids[h..], out)
}

// Pairs with one end in `xs` and one in `ys`; `w` holds `xs` then `ys`.
fn conductances_across(w: &DMatrix<f64>, xs: &[usize], ys: &[usize], out: &mut DMatrix<f64>) -> Result<()> {
    let nx = xs.len();
    if nx == 1 && ys.len() == 1 {
        out[(xs[0], ys[0])] = w[(0, 1)];
        out[(ys[0], xs[0])] = w[(0, 1)];
        return Ok(());
    }
    let total = nx + ys.len();
    for rx in halves(nx) {
        for ry in halves(ys.len()) {
            let keep: Vec<usize> = rx.clone().chain(ry.start + nx..ry.end + nx).collect();
            let drop: Vec<usize> = (0..total).filter(|l| !keep.contains(l)).collect();
            conductances_across(&schur(w, &drop, &keep)?, &xs[rx.clone()], &ys[ry], out)?;
        }
    }
    Ok(())
}

/// `log z_q = log det(L_q + J/p²)`.
pub fn log_partition(q: &LogWeightMatrix) -> Result<f64> {
    let p = q.p();
    if p == 1 {
        return Ok(0.0);
    }
    let f = factorize(q)?;
    Ok(f.pivots.iter().map(|x| x.ln()).sum::<f64>() + (p - 1) as f64 * f.shift)
}

/// Log-partition function and all marginal connecting probabilities.
pub fn marginal_connecting_probabilities(q: &LogWeightMatrix) -> Result<TreePosteriorSummary> {
    let p = q.p();
    if p == 1 {
        return Ok(TreePosteriorSummary {
            log_z: 0.0,
            mcp: DMatrix::zeros(1, 1),
            shift: 0.0,
        });
    }
    let f = factorize(q)?;
    let ids: Vec<usize> = (0..p).collect();
    let mut cond = DMatrix::zeros(p, p);
    conductances_within(&f.weights, &ids, &mut cond)?;
    let mut mcp = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in (j + 1)..p {
            let w = f.weights[(j, k)];
            if w == 0.0 {
                continue;
            }
            // the effective conductance includes the direct edge, so this is at most 1 up to rounding
            let v = (w / cond[(j, k)]).min(1.0);
            mcp[(j, k)] = v;
            mcp[(k, j)] = v;
        }
    }
    Ok(TreePosteriorSummary {
        log_z: f.pivots.iter().map(|x| x.ln()).sum::<f64>() + (p - 1) as f64 * f.shift,
        mcp,
        shift: f.shift,
    })
}

/// `Σ_{(j,k)∈T} q_jk`; `-∞` when the tree uses a blocked edge.
pub fn tree_log_posterior_unnormalized(tree: &SpanningTree, q: &LogWeightMatrix) -> f64 {
    tree.edges().iter().map(|&(j, k)| q.get(j, k)).sum()
}

/// Decodes a Prüfer sequence over `0..p` into its tree.
pub fn prufer_decode(p: usize, seq: &[usize]) -> SpanningTree {
    assert!(p >= 2 && seq.len() == p - 2);
    let mut degree = vec![1usize; p];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges: Vec<Edge> = Vec::with_capacity(p - 1);
    // smallest current leaf, advanced lazily
    let mut ptr = degree.iter().position(|&d| d == 1).unwrap();
    let mut leaf = ptr;
    for &x in seq {
        edges.push(canonical(leaf, x));
        degree[x] -= 1;
        if x < ptr && degree[x] == 1 {
            leaf = x;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edges.push(canonical(leaf, p - 1));
    SpanningTree::from_edges_unchecked(p, edges)
}

/// Every labelled tree on `p <= 8` nodes, in Prüfer-sequence order.
pub fn enumerate_trees(p: usize) -> Result<Vec<SpanningTree>> {
    if p == 0 || p > MAX_ENUMERATION_NODES {
        return Err(Error::InvalidParameter(format!(
            "tree enumeration supports 1 <= p <= {MAX_ENUMERATION_NODES}, got {p}"
        )));
    }
    if p == 1 {
        return Ok(vec![SpanningTree::from_edges_unchecked(1, Vec::new())]);
    }
    if p == 2 {
        return Ok(vec![SpanningTree::from_edges_unchecked(2, vec![(0, 1)])]);
    }
    let len = p - 2;
    let total = p.pow(len as u32);
    let mut out = Vec::with_capacity(total);
    let mut seq = vec![0usize; len];
    for _ in 0..total {
        out.push(prufer_decode(p, &seq));
        for x in seq.iter_mut().rev() {
            *x += 1;
            if *x < p {
                break;
            }
            *x = 0;
        }
    }
    Ok(out)
}

/// Tree drawn uniformly from all `p^(p-2)` labelled trees.
pub fn random_uniform_tree(p: usize, rng: &mut impl Rng) -> SpanningTree {
    match p {
        0 => panic!("a tree needs at least one node"),
        1 => SpanningTree::from_edges_unchecked(1, Vec::new()),
        2 => SpanningTree::from_edges_unchecked(2, vec![(0, 1)]),
        _ => {
            let seq: Vec<usize> = (0..p - 2).map(|_| rng.random_range(0..p)).collect();
            prufer_decode(p, &seq)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn random_q(p: usize, rng: &mut impl Rng) -> LogWeightMatrix {
        let mut m = DMatrix::zeros(p, p);
        for j in 0..p {
            for k in (j + 1)..p {
                let v = rng.random_range(-3.0..3.0);
                m[(j, k)] = v;
                m[(k, j)] = v;
            }
        }
        LogWeightMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn cayley_counts() {
        assert_eq!(enumerate_trees(2).unwrap().len(), 1);
        assert_eq!(enumerate_trees(3).unwrap().len(), 3);
        assert_eq!(enumerate_trees(4).unwrap().len(), 16);
        assert_eq!(enumerate_trees(5).unwrap().len(), 125);
        assert!(enumerate_trees(9).is_err());
    }

    #[test]
    fn enumeration_yields_distinct_valid_trees() {
        let trees = enumerate_trees(6).unwrap();
        let distinct: BTreeSet<Vec<Edge>> = trees.iter().map(|t| t.sorted_edges()).collect();
        assert_eq!(distinct.len(), 1296);
        for t in &trees {
            assert!(SpanningTree::new(6, t.edges().to_vec()).is_ok());
        }
    }

    #[test]
    fn wide_weight_range_matches_enumeration() {
        // a star of strong edges plus one leaf reachable only through weak ones
        let p = 6;
        let mut m = DMatrix::from_element(p, p, -200.0);
        for k in 1..(p - 1) {
            m[(0, k)] = 0.0;
            m[(k, 0)] = 0.0;
        }
        m[(5, 2)] = -120.0;
        m[(2, 5)] = -120.0;
        let q = LogWeightMatrix::from_matrix(m).unwrap();
        let trees = enumerate_trees(p).unwrap();
        let scores: Vec<f64> = trees.iter().map(|t| tree_log_posterior_unnormalized(t, &q)).collect();
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
        let s = marginal_connecting_probabilities(&q).unwrap();
        assert!((s.log_z - (top + z.ln())).abs() < 1e-10 * s.log_z.abs());
        let mut brute = DMatrix::zeros(p, p);
        for (t, sc) in trees.iter().zip(&scores) {
            for &(j, k) in t.edges() {
                brute[(j, k)] += (sc - top).exp() / z;
                brute[(k, j)] += (sc - top).exp() / z;
            }
        }
        assert!((&s.mcp - &brute).amax() < 1e-10);
        assert!((s.mcp[(2, 5)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn clustered_scores_match_enumeration() {
        // tight clusters joined by very weak edges, the hard case for resistances
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = 7;
        for _ in 0..20 {
            let level: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..400.0)).collect();
            let m = DMatrix::from_fn(p, p, |j, k| {
                if j == k {
                    0.0
                } else {
                    -(level[j] - level[k]).abs() - if j + k == 7 { 0.0 } else { 1.0 }
                }
            });
            let q = LogWeightMatrix::from_matrix(m).unwrap();
            let trees = enumerate_trees(p).unwrap();
            let scores: Vec<f64> = trees.iter().map(|t| tree_log_posterior_unnormalized(t, &q)).collect();
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
            let mut brute = DMatrix::zeros(p, p);
            for (t, sc) in trees.iter().zip(&scores) {
                for &(j, k) in t.edges() {
                    brute[(j, k)] += (sc - top).exp() / z;
                    brute[(k, j)] += (sc - top).exp() / z;
                }
            }
            let s = marginal_connecting_probabilities(&q).unwrap();
            assert!((&s.mcp - &brute).amax() < 1e-10, "{}", (&s.mcp - &brute).amax());
            assert!((s.log_z - (top + z.ln())).abs() < 1e-10 * s.log_z.abs().max(1.0));
        }
    }

    #[test]
    fn uniform_partition_function() {
        let z4 = log_partition(&LogWeightMatrix::uniform(4)).unwrap().exp();
        assert!((z4 - 16.0).abs() < 1e-10);
        let z3 = log_partition(&LogWeightMatrix::uniform(3)).unwrap().exp();
        assert!((z3 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn equal_weights_give_two_over_p() {
        for p in [3, 7, 25] {
            let s = marginal_connecting_probabilities(&LogWeightMatrix::uniform(p).shifted(-4.0)).unwrap();
            for j in 0..p {
                for k in 0..p {
                    if j != k {
                        assert!((s.mcp[(j, k)] - 2.0 / p as f64).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn blocked_edge_has_zero_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = random_q(5, &mut rng).matrix().clone();
        m[(1, 4)] = f64::NEG_INFINITY;
        m[(4, 1)] = f64::NEG_INFINITY;
        let q = LogWeightMatrix::from_matrix(m).unwrap();
        let s = marginal_connecting_probabilities(&q).unwrap();
        assert_eq!(s.mcp[(1, 4)], 0.0);
        let total: f64 = (0..5).flat_map(|j| ((j + 1)..5).map(move |k| (j, k))).map(|(j, k)| s.mcp[(j, k)]).sum();
        assert!((total - 4.0).abs() < 1e-10);
    }

    #[test]
    fn disconnected_support_is_reported() {
        let mut m = DMatrix::from_element(4, 4, f64::NEG_INFINITY);
        m[(0, 1)] = 0.0;
        m[(1, 0)] = 0.0;
        m[(2, 3)] = 0.0;
        m[(3, 2)] = 0.0;
        let q = LogWeightMatrix::from_matrix(m).unwrap();
        assert!(matches!(log_partition(&q), Err(Error::DisconnectedSupport(2))));
    }

    #[test]
    fn posterior_over_all_trees_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_q(5, &mut rng);
        let log_z = log_partition(&q).unwrap();
        let total: f64 = enumerate_trees(5)
            .unwrap()
            .iter()
            .map(|t| (tree_log_posterior_unnormalized(t, &q) - log_z).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shift_moves_log_mass_and_log_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_q(6, &mut rng);
        let c = 17.5;
        let t = random_uniform_tree(6, &mut rng);
        let a = tree_log_posterior_unnormalized(&t, &q);
        let b = tree_log_posterior_unnormalized(&t, &q.shifted(c));
        assert!((b - a - 5.0 * c).abs() < 1e-12);
        let s0 = marginal_connecting_probabilities(&q).unwrap();
        let s1 = marginal_connecting_probabilities(&q.shifted(c)).unwrap();
        assert!((s1.log_z - s0.log_z - 5.0 * c).abs() < 1e-9);
        assert!((s1.mcp - s0.mcp).amax() < 1e-10);
    }

    #[test]
    fn huge_negative_scores_do_not_underflow() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_q(6, &mut rng);
        let s0 = marginal_connecting_probabilities(&q).unwrap();
        let s1 = marginal_connecting_probabilities(&q.shifted(-5000.0)).unwrap();
        assert!((s1.mcp - s0.mcp).amax() < 1e-10);
        assert!(s1.log_z.is_finite());
    }

    #[test]
    fn increasing_a_score_increases_its_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_q(7, &mut rng);
        let base = marginal_connecting_probabilities(&q).unwrap();
        let mut m = q.matrix().clone();
        m[(2, 5)] += 0.1;
        m[(5, 2)] += 0.1;
        let bumped = marginal_connecting_probabilities(&LogWeightMatrix::from_matrix(m).unwrap()).unwrap();
        assert!(bumped.mcp[(2, 5)] > base.mcp[(2, 5)]);
    }

    #[test]
    fn random_uniform_tree_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for p in 1..40 {
            let t = random_uniform_tree(p, &mut rng);
            assert!(SpanningTree::new(p, t.edges().to_vec()).is_ok());
        }
    }
}
