//! Gibbs sampler over `(T, τ, v)`.
//!
//! Each sweep cuts every tree edge in turn (or a random subset), finds the
//! two sides of the cut from the incidence projection, and reconnects them
//! with a pair drawn from all `|V1| x |V2|` crossing pairs with probability
//! `∝ exp(q)`. The global scale `τ` moves by random-walk Metropolis on the
//! real line with `τ = |τ̃|`, and degree-prior weights `v` are drawn from
//! their Dirichlet full conditional.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, IncidenceMatrix, SpanningTree};
use crate::mode::prim_mode;
use crate::weights::{
    degree_prior_log_normalizer, gdp_edge_constant, gdp_kernel, log_weights_from_distances,
    mu_tau_from_distances, DataMatrix, LogWeightMatrix, PairwiseDistances, ShrinkageParams, TreePrior,
};

/// Target acceptance rate of the `τ` random walk.
pub const TARGET_ACCEPT: f64 = 0.3;
/// Learning rate of the multiplicative step-size adaptation.
const ADAPT_RATE: f64 = 0.05;

/// Which edges a sweep visits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scan {
    /// Every edge position `0..p-1` in order.
    Full,
    /// `edges` positions drawn without replacement each sweep.
    Random { edges: usize },
}

impl Scan {
    /// Random scan over `⌈(p-1)/4⌉` edges.
    pub fn random_quarter(p: usize) -> Self {
        Scan::Random {
            edges: (p.saturating_sub(1)).div_ceil(4).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Independent stream index; chains sharing a seed differ by stream.
    #[serde(default)]
    pub stream: u64,
    pub scan: Scan,
    /// Initial half-width of the `τ̃` proposal; defaults to `τ_init / 2`.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Adapt `delta` during burn-in.
    #[serde(default = "default_true")]
    pub adapt: bool,
    #[serde(default = "default_target")]
    pub target_accept: f64,
    /// Keep every `thin`-th post-burn-in draw.
    #[serde(default = "default_one")]
    pub thin: usize,
    /// Sample `τ`; when false it stays at its initial value.
    #[serde(default = "default_true")]
    pub update_tau: bool,
    /// Initial `τ`; defaults to `μ_τ`.
    #[serde(default)]
    pub tau_init: Option<f64>,
}

fn default_true() -> bool {
    true
}
fn default_target() -> f64 {
    TARGET_ACCEPT
}
fn default_one() -> usize {
    1
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 1000,
            seed: 0,
            stream: 0,
            scan: Scan::Full,
            delta: None,
            adapt: true,
            target_accept: TARGET_ACCEPT,
            thin: 1,
            update_tau: true,
            tau_init: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if let Scan::Random { edges } = self.scan {
            if edges == 0 || edges > p.saturating_sub(1) {
                return Err(Error::InvalidParameter(format!(
                    "random scan size {edges} must lie in 1..={}",
                    p.saturating_sub(1)
                )));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!("delta must be positive, got {d}")));
            }
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target_accept must lie in (0,1)".into()));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One retained state of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub iteration: usize,
    pub tree: SpanningTree,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    /// Unnormalized log posterior: tree log-likelihood under the GDP edge
    /// density, log prior of the tree, and the exponential prior on `τ`.
    pub log_post: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Acceptance rate of `τ` moves after burn-in.
    pub accept_rate_tau: f64,
    /// Acceptance rate of `τ` moves during burn-in.
    pub accept_rate_tau_burn_in: f64,
    /// Proposal half-width after adaptation.
    pub final_delta: f64,
    pub tau_trace: Vec<f64>,
    /// `degree_traces[j][i]` is the degree of node `j` in retained draw `i`.
    pub degree_traces: Vec<Vec<u32>>,
    pub ess_tau: f64,
    /// Effective sample size of each node's degree trace.
    pub ess_degree: Vec<f64>,
    /// Full Gram-inverse recomputations (scheduled plus error-triggered).
    pub gram_refreshes: usize,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<PosteriorDraw>,
    pub diagnostics: ChainDiagnostics,
}

impl ChainOutput {
    /// Fraction of draws containing each pair.
    pub fn empirical_mcp(&self) -> DMatrix<f64> {
        let p = self.draws.first().map_or(0, |d| d.tree.p());
        empirical_mcp(self.draws.iter().map(|d| &d.tree), p)
    }
}

/// Fraction of `trees` containing each pair.
pub fn empirical_mcp<'a>(trees: impl IntoIterator<Item = &'a SpanningTree>, p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    let mut count = 0usize;
    for t in trees {
        count += 1;
        for &(j, k) in t.edges() {
            m[(j, k)] += 1.0;
            m[(k, j)] += 1.0;
        }
    }
    if count > 0 {
        m /= count as f64;
    }
    m
}

/// Runs `f`, and on a stale-cache signal recomputes the Gram inverse and
/// retries once.
fn with_refresh<T>(inc: &mut IncidenceMatrix, mut f: impl FnMut(&mut IncidenceMatrix) -> Result<T>) -> Result<T> {
    match f(inc) {
        Err(Error::CorruptedProjection(_)) | Err(Error::NonPositivePivot(_)) => {
            log::debug!("refreshing Gram inverse after numerical drift");
            inc.refresh();
            f(inc)
        }
        other => other,
    }
}

/// One cut-and-reconnect move on edge position `s`. The current edge is
/// among the candidates. Returns the edge now at position `s`.
pub fn cut_and_reconnect(
    inc: &mut IncidenceMatrix,
    s: usize,
    q: &LogWeightMatrix,
    rng: &mut impl Rng,
) -> Result<Edge> {
    let side = with_refresh(inc, |inc| inc.cut_sides(s))?;
    let (v1, v2): (Vec<usize>, Vec<usize>) = (0..inc.p()).partition(|&l| side[l]);
    let qm = q.matrix();
    let mut max = f64::NEG_INFINITY;
    for &a in &v1 {
        let col = qm.column(a);
        for &b in &v2 {
            max = max.max(col[b]);
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::DisconnectedSupport(v2[0]));
    }
    let mut weights = Vec::with_capacity(v1.len() * v2.len());
    let mut total = 0.0;
    for &a in &v1 {
        let col = qm.column(a);
        for &b in &v2 {
            let w = (col[b] - max).exp();
            total += w;
            weights.push(w);
        }
    }
    let mut u = rng.random::<f64>() * total;
    let mut pick = weights.len() - 1;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            pick = i;
            break;
        }
        u -= w;
    }
    // rounding may leave `pick` on a zero-weight tail entry
    while weights[pick] == 0.0 {
        pick -= 1;
    }
    let new_edge = canonical(v1[pick / v2.len()], v2[pick % v2.len()]);
    with_refresh(inc, |inc| inc.swap_edge_unchecked(s, new_edge))?;
    Ok(new_edge)
}

/// Edge positions visited by one sweep.
pub fn scan_order(scan: Scan, m: usize, rng: &mut impl Rng) -> Vec<usize> {
    match scan {
        Scan::Full => (0..m).collect(),
        Scan::Random { edges } => rand::seq::index::sample(rng, m, edges.min(m)).into_vec(),
    }
}

/// One sweep of cut-and-reconnect moves over the maintained tree.
pub fn sweep(inc: &mut IncidenceMatrix, q: &LogWeightMatrix, scan: Scan, rng: &mut impl Rng) -> Result<()> {
    let m = inc.edges().len();
    for s in scan_order(scan, m, rng) {
        cut_and_reconnect(inc, s, q, rng)?;
    }
    Ok(())
}

/// Tree update for a standalone draw. Builds the incidence cache from
/// scratch, so prefer [`TreeChain`] inside loops.
pub fn update_tree_sweep(
    draw: &PosteriorDraw,
    q: &LogWeightMatrix,
    scan: Scan,
    rng: &mut impl Rng,
) -> Result<PosteriorDraw> {
    let mut inc = IncidenceMatrix::new(&draw.tree);
    sweep(&mut inc, q, scan, rng)?;
    Ok(PosteriorDraw {
        tree: inc.tree(),
        ..draw.clone()
    })
}

/// Log full conditional of `τ` given the tree, up to a constant:
/// `Σ_{(j,k)∈T} [-n log τ - (α+n) log(1 + d_jk/τ)] - τ/μ_τ`.
pub fn tau_log_conditional(tau: f64, tree_distances: &[f64], n: usize, alpha: f64, mu_tau: f64) -> f64 {
    if !(tau > 0.0) {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    let lik: f64 = tree_distances
        .iter()
        .map(|&d| -nf * tau.ln() + gdp_kernel(d, n, alpha, tau))
        .sum();
    lik - tau / mu_tau
}

/// Random-walk Metropolis step on `τ̃`; returns the new `τ̃` and whether the
/// proposal was accepted.
pub fn update_tau(
    tau_tilde: f64,
    delta: f64,
    tree_distances: &[f64],
    n: usize,
    alpha: f64,
    mu_tau: f64,
    rng: &mut impl Rng,
) -> (f64, bool) {
    let proposal = tau_tilde + rng.random_range(-delta..delta);
    let cur = tau_log_conditional(tau_tilde.abs(), tree_distances, n, alpha, mu_tau);
    let new = tau_log_conditional(proposal.abs(), tree_distances, n, alpha, mu_tau);
    let log_u = rng.random::<f64>().ln();
    if log_u < new - cur {
        (proposal, true)
    } else {
        (tau_tilde, false)
    }
}

/// Dirichlet parameters `D_j + α_dir - 1` of the degree-weight full conditional.
pub fn degree_dirichlet_parameters(tree: &SpanningTree, alpha_dir: f64) -> Result<Vec<f64>> {
    if !(alpha_dir > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Dirichlet concentration must be positive, got {alpha_dir}"
        )));
    }
    Ok(tree.degrees().iter().map(|&d| d as f64 + alpha_dir - 1.0).collect())
}

/// Draws from `Dir(params)` by normalizing independent gamma variates.
pub fn sample_dirichlet(params: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(params.len());
    for &a in params {
        let dist = Gamma::new(a, 1.0)
            .map_err(|e| Error::InvalidParameter(format!("Dirichlet parameter {a}: {e}")))?;
        g.push(dist.sample(rng));
    }
    let total: f64 = g.iter().sum();
    if !(total > 0.0) {
        // every gamma draw underflowed; fall back to the mean
        let s: f64 = params.iter().sum();
        return Ok(params.iter().map(|a| a / s).collect());
    }
    Ok(g.into_iter().map(|x| x / total).collect())
}

/// `v ~ Dir(D_1 + α_dir - 1, ..., D_p + α_dir - 1)`.
pub fn update_degree_weights(tree: &SpanningTree, alpha_dir: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    sample_dirichlet(&degree_dirichlet_parameters(tree, alpha_dir)?, rng)
}

/// Effective sample size via Geyer's initial positive sequence.
pub fn effective_sample_size(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 4 {
        return n as f64;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let var = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut lag = 0;
    let mut prev_pair = f64::INFINITY;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau_int = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau_int).min(n as f64 * 10.0)
}

/// Live chain state with the incidence cache kept across sweeps.
pub struct TreeChain {
    dist: PairwiseDistances,
    alpha: f64,
    mu_tau: f64,
    prior: TreePrior,
    inc: IncidenceMatrix,
    tau_tilde: f64,
    q: LogWeightMatrix,
}

impl TreeChain {
    /// Starts at the conditional mode given `tau` and the prior's initial `η`.
    pub fn new(data: &DataMatrix, prior: TreePrior, alpha: f64, tau: f64) -> Result<Self> {
        let dist = data.distances();
        let mu_tau = mu_tau_from_distances(&dist)?;
        Self::from_distances(dist, prior, alpha, tau, mu_tau)
    }

    pub fn from_distances(
        dist: PairwiseDistances,
        prior: TreePrior,
        alpha: f64,
        tau: f64,
        mu_tau: f64,
    ) -> Result<Self> {
        let params = ShrinkageParams::new(alpha, tau, mu_tau)?;
        prior.validate(dist.p())?;
        let q = log_weights_from_distances(&dist, &params, &prior)?;
        let tree = prim_mode(&q)?;
        Ok(Self {
            inc: IncidenceMatrix::new(&tree),
            dist,
            alpha,
            mu_tau,
            prior,
            tau_tilde: tau,
            q,
        })
    }

    pub fn tree(&self) -> SpanningTree {
        self.inc.tree()
    }

    pub fn tau(&self) -> f64 {
        self.tau_tilde.abs()
    }

    pub fn q(&self) -> &LogWeightMatrix {
        &self.q
    }

    pub fn prior(&self) -> &TreePrior {
        &self.prior
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.inc
    }

    fn params(&self) -> ShrinkageParams {
        ShrinkageParams {
            alpha: self.alpha,
            tau: self.tau(),
            mu_tau: self.mu_tau,
        }
    }

    fn reassemble(&mut self) -> Result<()> {
        self.q = log_weights_from_distances(&self.dist, &self.params(), &self.prior)?;
        Ok(())
    }

    fn tree_distances(&self) -> Vec<f64> {
        self.inc.edges().iter().map(|&(j, k)| self.dist.get(j, k)).collect()
    }

    pub fn sweep(&mut self, scan: Scan, rng: &mut impl Rng) -> Result<()> {
        sweep(&mut self.inc, &self.q, scan, rng)
    }

    /// Metropolis step on `τ`; reassembles `q` on acceptance.
    pub fn step_tau(&mut self, delta: f64, rng: &mut impl Rng) -> Result<bool> {
        let d = self.tree_distances();
        let (t, accepted) = update_tau(self.tau_tilde, delta, &d, self.dist.n(), self.alpha, self.mu_tau, rng);
        if accepted {
            self.tau_tilde = t;
            self.reassemble()?;
        }
        Ok(accepted)
    }

    /// Dirichlet draw of `v` for the degree prior; no-op for other priors.
    pub fn step_degree_weights(&mut self, rng: &mut impl Rng) -> Result<()> {
        if let TreePrior::Degree { alpha_dir, .. } = self.prior {
            let v = update_degree_weights(&self.inc.tree(), alpha_dir, rng)?;
            self.prior = TreePrior::Degree { v, alpha_dir };
            self.reassemble()?;
        }
        Ok(())
    }

    pub fn log_posterior(&self) -> f64 {
        let n = self.dist.n();
        let tau = self.tau();
        let c = gdp_edge_constant(n, self.alpha, tau);
        let lik: f64 = self
            .inc
            .edges()
            .iter()
            .map(|&(j, k)| c + gdp_kernel(self.dist.get(j, k), n, self.alpha, tau) + self.prior.log_eta(j, k))
            .sum();
        let tree_norm = match &self.prior {
            TreePrior::Degree { v, .. } => degree_prior_log_normalizer(v).unwrap_or(0.0),
            _ => 0.0,
        };
        lik - tree_norm - self.mu_tau.ln() - tau / self.mu_tau
    }

    pub fn draw(&self, iteration: usize) -> PosteriorDraw {
        PosteriorDraw {
            iteration,
            tree: self.tree(),
            tau: self.tau(),
            v: match &self.prior {
                TreePrior::Degree { v, .. } => Some(v.clone()),
                _ => None,
            },
            log_post: self.log_posterior(),
        }
    }
}

/// Runs one chain. Deterministic given `config.seed` and `config.stream`.
pub fn run_chain(data: &DataMatrix, prior: &TreePrior, alpha: f64, config: &ChainConfig) -> Result<ChainOutput> {
    let p = data.p();
    config.validate(p)?;
    let dist = data.distances();
    let mu_tau = mu_tau_from_distances(&dist)?;
    let tau0 = config.tau_init.unwrap_or(mu_tau);
    // initial η: 1/p² everywhere for the degree prior, the given η otherwise
    let init_prior = match prior {
        TreePrior::Degree { alpha_dir, .. } => TreePrior::degree_uniform(p, *alpha_dir),
        other => other.clone(),
    };
    let mut chain = TreeChain::from_distances(dist, init_prior, alpha, tau0, mu_tau)?;
    let mut rng = config.rng();
    let mut delta = config.delta.unwrap_or(0.5 * tau0);
    let is_degree = matches!(prior, TreePrior::Degree { .. });

    let mut draws = Vec::new();
    let (mut acc_burn, mut acc_post) = (0usize, 0usize);
    for it in 0..config.iterations {
        chain.sweep(config.scan, &mut rng)?;
        if config.update_tau {
            let accepted = chain.step_tau(delta, &mut rng)?;
            if it < config.burn_in {
                acc_burn += accepted as usize;
                if config.adapt {
                    let a = if accepted { 1.0 } else { 0.0 };
                    delta *= (ADAPT_RATE * (a - config.target_accept)).exp();
                }
            } else {
                acc_post += accepted as usize;
            }
        }
        if is_degree {
            chain.step_degree_weights(&mut rng)?;
        }
        if it >= config.burn_in && (it - config.burn_in) % config.thin == 0 {
            draws.push(chain.draw(it));
        }
    }

    let post_iters = (config.iterations - config.burn_in) as f64;
    let tau_trace: Vec<f64> = draws.iter().map(|d| d.tau).collect();
    let mut degree_traces = vec![Vec::with_capacity(draws.len()); p];
    for d in &draws {
        for (j, &deg) in d.tree.degrees().iter().enumerate() {
            degree_traces[j].push(deg as u32);
        }
    }
    let ess_degree = degree_traces
        .iter()
        .map(|t| effective_sample_size(&t.iter().map(|&x| x as f64).collect::<Vec<_>>()))
        .collect();
    let diagnostics = ChainDiagnostics {
        accept_rate_tau: if config.update_tau { acc_post as f64 / post_iters } else { 0.0 },
        accept_rate_tau_burn_in: if config.update_tau && config.burn_in > 0 {
            acc_burn as f64 / config.burn_in as f64
        } else {
            0.0
        },
        final_delta: delta,
        ess_tau: effective_sample_size(&tau_trace),
        tau_trace,
        degree_traces,
        ess_degree,
        gram_refreshes: chain.inc.refresh_count(),
    };
    Ok(ChainOutput { draws, diagnostics })
}

/// Runs `chains` chains on separate threads; chain `c` uses stream `c`.
pub fn run_chains(
    data: &DataMatrix,
    prior: &TreePrior,
    alpha: f64,
    config: &ChainConfig,
    chains: usize,
) -> Result<Vec<ChainOutput>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                let cfg = ChainConfig {
                    stream: c as u64,
                    ..config.clone()
                };
                scope.spawn(move || run_chain(data, prior, alpha, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}
