//! Hidden Markov model whose latent states are spanning trees.
//!
//! Each time point of a series is one `p`-vector. Given state `k` its
//! density is the product over the edges of tree `k` of the GDP edge density
//! with `n = 1`. States follow a Markov chain with a shared initial
//! distribution and one transition matrix per condition.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{IncidenceMatrix, SpanningTree};
use crate::mode::prim_mode;
use crate::sampler::{empirical_mcp, sample_dirichlet, sweep, Scan, TARGET_ACCEPT};
use crate::weights::{gdp_edge_constant, gdp_kernel, DataMatrix, LogWeightMatrix, ShrinkageParams};

/// Dirichlet concentration on the initial distribution and transition rows.
pub const DIR_CONC: f64 = 0.5;
pub const DEFAULT_STATES: usize = 20;

/// One multivariate time series, standardized per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmSeries {
    pub id: String,
    pub subject: usize,
    pub condition: usize,
    /// `T x p`, one row per time point.
    y: DMatrix<f64>,
}

impl HmmSeries {
    pub fn new(id: impl Into<String>, subject: usize, condition: usize, raw: DMatrix<f64>) -> Result<Self> {
        let y = DataMatrix::standardize(raw)?.values().clone();
        Ok(Self {
            id: id.into(),
            subject,
            condition,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.y
    }
}

/// Latent state path of one series, 0-based.
pub type StateSequence = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeHmmModel {
    pub trees: Vec<SpanningTree>,
    pub q0: Vec<f64>,
    /// `trans[g]` is the row-stochastic `K x K` matrix of condition `g`.
    pub trans: Vec<DMatrix<f64>>,
    pub tau: f64,
    pub alpha: f64,
    pub mu_tau: f64,
}

impl TreeHmmModel {
    pub fn k(&self) -> usize {
        self.trees.len()
    }

    pub fn p(&self) -> usize {
        self.trees.first().map_or(0, SpanningTree::p)
    }

    pub fn conditions(&self) -> usize {
        self.trans.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::InvalidParameter("model needs at least one state".into()));
        }
        if self.q0.len() != k {
            return Err(Error::Dimension(format!("q0 has {} entries for {k} states", self.q0.len())));
        }
        check_simplex(&self.q0, "q0")?;
        for (g, t) in self.trans.iter().enumerate() {
            if t.shape() != (k, k) {
                return Err(Error::Dimension(format!("transition matrix {g} is not {k}x{k}")));
            }
            for r in 0..k {
                let row: Vec<f64> = t.row(r).iter().copied().collect();
                check_simplex(&row, &format!("row {r} of transition matrix {g}"))?;
            }
        }
        let p = self.p();
        if self.trees.iter().any(|t| t.p() != p) {
            return Err(Error::Dimension("state trees disagree on node count".into()));
        }
        ShrinkageParams::new(self.alpha, self.tau, self.mu_tau).map(|_| ())
    }

    /// Relabels states so that new state `i` is old state `perm[i]`.
    pub fn permute_states(&self, perm: &[usize]) -> Self {
        let k = self.k();
        Self {
            trees: perm.iter().map(|&i| self.trees[i].clone()).collect(),
            q0: perm.iter().map(|&i| self.q0[i]).collect(),
            trans: self
                .trans
                .iter()
                .map(|t| DMatrix::from_fn(k, k, |a, b| t[(perm[a], perm[b])]))
                .collect(),
            ..self.clone()
        }
    }
}

fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("{what} has negative entries")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Log density of one time point under `tree`, all constants included.
pub fn emission_log_density(y: &[f64], tree: &SpanningTree, tau: f64, alpha: f64) -> f64 {
    let c = gdp_edge_constant(1, alpha, tau);
    tree.edges()
        .iter()
        .map(|&(j, k)| c + gdp_kernel((y[j] - y[k]).abs(), 1, alpha, tau))
        .sum()
}

/// `T x K` table of emission log densities.
pub fn emission_table(series: &HmmSeries, trees: &[SpanningTree], tau: f64, alpha: f64) -> DMatrix<f64> {
    let t_len = series.len();
    let mut row = vec![0.0; series.p()];
    let mut out = DMatrix::zeros(t_len, trees.len());
    for t in 0..t_len {
        for (dst, src) in row.iter_mut().zip(series.y.row(t).iter()) {
            *dst = *src;
        }
        for (k, tree) in trees.iter().enumerate() {
            out[(t, k)] = emission_log_density(&row, tree, tau, alpha);
        }
    }
    out
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Forward pass in log domain. Returns the filtered log-probabilities
/// `log pr(z_t = k | y_1..t)` and the marginal log-likelihood.
pub fn forward(emissions: &DMatrix<f64>, q0: &[f64], trans: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (t_len, k) = emissions.shape();
    let log_trans = trans.map(f64::ln);
    let mut alpha = DMatrix::from_element(t_len, k, f64::NEG_INFINITY);
    let mut loglik = 0.0;
    let mut prev = vec![0.0; k];
    for t in 0..t_len {
        let mut cur: Vec<f64> = (0..k)
            .map(|j| {
                let prior = if t == 0 {
                    q0[j].ln()
                } else {
                    log_sum_exp((0..k).map(|i| prev[i] + log_trans[(i, j)]))
                };
                prior + emissions[(t, j)]
            })
            .collect();
        let norm = log_sum_exp(cur.iter().copied());
        if !norm.is_finite() {
            return Err(Error::Degenerate(format!("every state has zero density at time {t}")));
        }
        loglik += norm;
        for (j, c) in cur.iter_mut().enumerate() {
            *c -= norm;
            alpha[(t, j)] = *c;
        }
        prev = cur;
    }
    Ok((alpha, loglik))
}

/// Exact marginal log-likelihood of a series under condition `g`.
pub fn series_log_likelihood(series: &HmmSeries, model: &TreeHmmModel, g: usize) -> Result<f64> {
    let e = emission_table(series, &model.trees, model.tau, model.alpha);
    Ok(forward(&e, &model.q0, &model.trans[g])?.1)
}

/// Forward filtering, backward sampling from the exact conditional posterior.
pub fn ffbs_from_emissions(
    emissions: &DMatrix<f64>,
    q0: &[f64],
    trans: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<StateSequence> {
    let (t_len, k) = emissions.shape();
    if t_len == 0 {
        return Ok(Vec::new());
    }
    let (alpha, _) = forward(emissions, q0, trans)?;
    let log_trans = trans.map(f64::ln);
    let mut z = vec![0; t_len];
    z[t_len - 1] = sample_log_categorical((0..k).map(|j| alpha[(t_len - 1, j)]), rng);
    for t in (0..t_len - 1).rev() {
        let next = z[t + 1];
        z[t] = sample_log_categorical((0..k).map(|i| alpha[(t, i)] + log_trans[(i, next)]), rng);
    }
    Ok(z)
}

pub fn ffbs_states(series: &HmmSeries, model: &TreeHmmModel, rng: &mut impl Rng) -> Result<StateSequence> {
    let e = emission_table(series, &model.trees, model.tau, model.alpha);
    ffbs_from_emissions(&e, &model.q0, &model.trans[series.condition], rng)
}

fn sample_log_categorical(logp: impl Iterator<Item = f64> + Clone, rng: &mut impl Rng) -> usize {
    let m = logp.clone().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.map(|x| (x - m).exp()).collect();
    let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Initial-state and transition counts per condition.
pub fn transition_counts(
    series: &[HmmSeries],
    states: &[StateSequence],
    k: usize,
    conditions: usize,
) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let mut init = vec![0.0; k];
    let mut trans = vec![DMatrix::zeros(k, k); conditions];
    for (s, z) in series.iter().zip(states) {
        if let Some(&z0) = z.first() {
            init[z0] += 1.0;
        }
        for w in z.windows(2) {
            trans[s.condition][(w[0], w[1])] += 1.0;
        }
    }
    (init, trans)
}

/// Conjugate Dirichlet draws of `q0` and every transition row.
pub fn update_markov_params(
    model: &mut TreeHmmModel,
    series: &[HmmSeries],
    states: &[StateSequence],
    rng: &mut impl Rng,
) -> Result<()> {
    let k = model.k();
    let (init, trans) = transition_counts(series, states, k, model.conditions());
    model.q0 = sample_dirichlet(&init.iter().map(|c| c + DIR_CONC).collect::<Vec<_>>(), rng)?;
    for (g, counts) in trans.iter().enumerate() {
        for r in 0..k {
            let params: Vec<f64> = counts.row(r).iter().map(|c| c + DIR_CONC).collect();
            let row = sample_dirichlet(&params, rng)?;
            for (c, v) in row.into_iter().enumerate() {
                model.trans[g][(r, c)] = v;
            }
        }
    }
    Ok(())
}

fn add_row_scores(q: &mut DMatrix<f64>, y: &[f64], alpha: f64, tau: f64) {
    let p = y.len();
    for k in 1..p {
        for j in 0..k {
            q[(j, k)] += gdp_kernel((y[j] - y[k]).abs(), 1, alpha, tau);
        }
    }
}

fn finish_scores(mut q: DMatrix<f64>) -> LogWeightMatrix {
    let p = q.nrows();
    for j in 0..p {
        q[(j, j)] = f64::NEG_INFINITY;
        for k in (j + 1)..p {
            q[(k, j)] = q[(j, k)];
        }
    }
    LogWeightMatrix::from_matrix(q).expect("pooled scores are symmetric")
}

/// Pooled log edge scores for the time points assigned to `state`, and the
/// number of such points.
pub fn pooled_log_weights(
    series: &[HmmSeries],
    states: &[StateSequence],
    state: usize,
    alpha: f64,
    tau: f64,
) -> (LogWeightMatrix, usize) {
    let p = series.first().map_or(0, HmmSeries::p);
    let mut q = DMatrix::zeros(p, p);
    let mut row = vec![0.0; p];
    let mut count = 0;
    for (s, z) in series.iter().zip(states) {
        for (t, _) in z.iter().enumerate().filter(|&(_, &zt)| zt == state) {
            count += 1;
            row.iter_mut().zip(s.y.row(t).iter()).for_each(|(d, v)| *d = *v);
            add_row_scores(&mut q, &row, alpha, tau);
        }
    }
    (finish_scores(q), count)
}

/// Distances `|y_tj - y_tk|` along each time point's assigned tree.
fn assigned_edge_distances(series: &[HmmSeries], states: &[StateSequence], trees: &[SpanningTree]) -> Vec<f64> {
    let mut out = Vec::new();
    for (s, z) in series.iter().zip(states) {
        for (t, &zt) in z.iter().enumerate() {
            for &(j, k) in trees[zt].edges() {
                out.push((s.y[(t, j)] - s.y[(t, k)]).abs());
            }
        }
    }
    out
}

/// Random-walk Metropolis on `τ̃` pooling every assigned time point.
fn step_tau(tau_tilde: f64, delta: f64, dists: &[f64], alpha: f64, mu_tau: f64, rng: &mut impl Rng) -> (f64, bool) {
    crate::sampler::update_tau(tau_tilde, delta, dists, 1, alpha, mu_tau, rng)
}

/// `μ_τ` from all series stacked along time.
pub fn pooled_mu_tau(series: &[HmmSeries]) -> Result<f64> {
    let p = series.first().map_or(0, HmmSeries::p);
    let total: usize = series.iter().map(HmmSeries::len).sum();
    let mut stacked = DMatrix::zeros(total, p);
    let mut row = 0;
    for s in series {
        stacked.rows_mut(row, s.len()).copy_from(&s.y);
        row += s.len();
    }
    crate::weights::empirical_tau_prior_mean(&DataMatrix::raw(stacked))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmConfig {
    pub states: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Length of the windows scored when picking initial trees.
    pub init_window: usize,
}

impl Default for HmmConfig {
    fn default() -> Self {
        Self {
            states: DEFAULT_STATES,
            iterations: 20_000,
            burn_in: 10_000,
            seed: 0,
            alpha: ShrinkageParams::DEFAULT_ALPHA,
            init_window: 10,
        }
    }
}

/// Posterior summaries of a fitted model.
#[derive(Debug, Clone)]
pub struct HmmFit {
    /// Mode trees, posterior-mean `q0` and transitions, posterior-mean `τ`.
    pub model: TreeHmmModel,
    /// Per-series most frequent state at each time point after burn-in.
    pub states: Vec<StateSequence>,
    /// Post-burn-in edge frequencies per state.
    pub state_mcp: Vec<DMatrix<f64>>,
    /// Time points per state, one row per retained iteration.
    pub occupancy_trace: Vec<Vec<usize>>,
    pub tau_trace: Vec<f64>,
    pub accept_rate_tau: f64,
}

fn symmetric_difference(a: &SpanningTree, b: &SpanningTree) -> usize {
    let sa = a.edge_set();
    b.edges().iter().filter(|e| !sa.contains(e)).count()
}

/// Initial trees: mode trees of short windows, chosen by farthest-point
/// selection under edge-set distance.
fn initial_trees(series: &[HmmSeries], k: usize, window: usize, alpha: f64, tau: f64) -> Result<Vec<SpanningTree>> {
    let mut candidates = Vec::new();
    for s in series {
        let p = s.p();
        let mut row = vec![0.0; p];
        for start in (0..s.len()).step_by(window) {
            let mut q = DMatrix::zeros(p, p);
            for t in start..(start + window).min(s.len()) {
                row.iter_mut().zip(s.y.row(t).iter()).for_each(|(d, v)| *d = *v);
                add_row_scores(&mut q, &row, alpha, tau);
            }
            candidates.push(prim_mode(&finish_scores(q))?);
        }
    }
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no time points to fit".into()));
    }
    let mut chosen = vec![0];
    let mut dmin: Vec<usize> = candidates.iter().map(|c| symmetric_difference(c, &candidates[0])).collect();
    while chosen.len() < k {
        let (next, _) = dmin
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("candidates non-empty");
        chosen.push(next);
        for (d, c) in dmin.iter_mut().zip(&candidates) {
            *d = (*d).min(symmetric_difference(c, &candidates[next]));
        }
    }
    Ok(chosen.into_iter().map(|i| candidates[i].clone()).collect())
}

/// Blocked Gibbs sampler over state paths, trees, Markov parameters and `τ`.
pub fn fit(series: &[HmmSeries], conditions: usize, config: &HmmConfig) -> Result<HmmFit> {
    use rand::SeedableRng;
    if series.is_empty() {
        return Err(Error::InvalidParameter("no series given".into()));
    }
    if config.burn_in >= config.iterations {
        return Err(Error::InvalidParameter("burn_in must be smaller than iterations".into()));
    }
    let p = series[0].p();
    if series.iter().any(|s| s.p() != p) {
        return Err(Error::Dimension("series disagree on variable count".into()));
    }
    if let Some(s) = series.iter().find(|s| s.condition >= conditions) {
        return Err(Error::InvalidParameter(format!("series {} has condition {} of {conditions}", s.id, s.condition)));
    }
    let k = config.states;
    let alpha = config.alpha;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let mu_tau = pooled_mu_tau(series)?;

    // start τ at the n = 1 plug-in scale of all adjacent-variable gaps
    let pooled: Vec<f64> = series
        .iter()
        .flat_map(|s| (0..s.len()).flat_map(move |t| (1..p).map(move |j| (s.y[(t, j)] - s.y[(t, j - 1)]).abs())))
        .collect();
    let mut tau_tilde = (alpha * pooled.iter().sum::<f64>() / pooled.len() as f64).max(mu_tau);

    let trees = initial_trees(series, k, config.init_window.max(1), alpha, tau_tilde)?;
    let mut model = TreeHmmModel {
        trees,
        q0: vec![1.0 / k as f64; k],
        trans: vec![DMatrix::from_element(k, k, 1.0 / k as f64); conditions],
        tau: tau_tilde,
        alpha,
        mu_tau,
    };
    let mut incidences: Vec<IncidenceMatrix> = model.trees.iter().map(IncidenceMatrix::new).collect();
    let mut delta = 0.1 * tau_tilde;

    let keep = config.iterations - config.burn_in;
    let mut state_counts: Vec<DMatrix<f64>> = series.iter().map(|s| DMatrix::zeros(s.len(), k)).collect();
    let mut q0_sum = vec![0.0; k];
    let mut trans_sum = vec![DMatrix::zeros(k, k); conditions];
    let mut edge_freq = vec![DMatrix::zeros(p, p); k];
    let mut occupancy_trace = Vec::with_capacity(keep);
    let mut tau_trace = Vec::with_capacity(keep);
    let mut accepted = 0usize;

    for it in 0..config.iterations {
        let states: Vec<StateSequence> = series
            .iter()
            .map(|s| ffbs_states(s, &model, &mut rng))
            .collect::<Result<_>>()?;
        update_markov_params(&mut model, series, &states, &mut rng)?;
        for (state, inc) in incidences.iter_mut().enumerate() {
            let (q, count) = pooled_log_weights(series, &states, state, alpha, model.tau);
            if count == 0 {
                continue;
            }
            sweep(inc, &q, Scan::Full, &mut rng)?;
            model.trees[state] = inc.tree();
        }
        let dists = assigned_edge_distances(series, &states, &model.trees);
        let (t, acc) = step_tau(tau_tilde, delta, &dists, alpha, mu_tau, &mut rng);
        tau_tilde = t;
        model.tau = tau_tilde.abs();
        if it < config.burn_in {
            delta *= (0.05 * (f64::from(u8::from(acc)) - TARGET_ACCEPT)).exp();
            continue;
        }
        accepted += acc as usize;
        for (cnt, z) in state_counts.iter_mut().zip(&states) {
            for (t, &zt) in z.iter().enumerate() {
                cnt[(t, zt)] += 1.0;
            }
        }
        for (a, b) in q0_sum.iter_mut().zip(&model.q0) {
            *a += b;
        }
        for (a, b) in trans_sum.iter_mut().zip(&model.trans) {
            *a += b;
        }
        for (f, tree) in edge_freq.iter_mut().zip(&model.trees) {
            *f += empirical_mcp(std::iter::once(tree), p);
        }
        let mut occ = vec![0; k];
        for z in &states {
            for &zt in z {
                occ[zt] += 1;
            }
        }
        occupancy_trace.push(occ);
        tau_trace.push(model.tau);
    }

    let kf = keep as f64;
    let map_states: Vec<StateSequence> = state_counts
        .iter()
        .map(|c| {
            (0..c.nrows())
                .map(|t| (0..k).fold(0, |best, j| if c[(t, j)] > c[(t, best)] { j } else { best }))
                .collect()
        })
        .collect();
    let tau_mean = tau_trace.iter().sum::<f64>() / kf;
    let mut mode_trees = model.trees.clone();
    for (state, tree) in mode_trees.iter_mut().enumerate() {
        let (q, count) = pooled_log_weights(series, &map_states, state, alpha, tau_mean);
        if count > 0 {
            *tree = prim_mode(&q)?;
        }
    }
    let mut q0: Vec<f64> = q0_sum.iter().map(|x| x / kf).collect();
    renormalize(&mut q0);
    let trans = trans_sum
        .into_iter()
        .map(|mut t| {
            t /= kf;
            for r in 0..k {
                let s: f64 = t.row(r).sum();
                t.row_mut(r).scale_mut(1.0 / s);
            }
            t
        })
        .collect();
    Ok(HmmFit {
        model: TreeHmmModel {
            trees: mode_trees,
            q0,
            trans,
            tau: tau_mean,
            alpha,
            mu_tau,
        },
        states: map_states,
        state_mcp: edge_freq.into_iter().map(|f| f / kf).collect(),
        occupancy_trace,
        tau_trace,
        accept_rate_tau: accepted as f64 / kf,
    })
}

fn renormalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Posterior probability of each condition under a uniform prior over
/// conditions, from exact forward-algorithm likelihoods.
pub fn condition_probabilities(series: &HmmSeries, model: &TreeHmmModel) -> Result<Vec<f64>> {
    let e = emission_table(series, &model.trees, model.tau, model.alpha);
    let ll: Vec<f64> = model
        .trans
        .iter()
        .map(|t| forward(&e, &model.q0, t).map(|r| r.1))
        .collect::<Result<_>>()?;
    let norm = log_sum_exp(ll.iter().copied());
    Ok(ll.iter().map(|l| (l - norm).exp()).collect())
}

/// Probability that `series` belongs to condition 0 rather than condition 1.
pub fn classify_condition(series: &HmmSeries, model: &TreeHmmModel) -> Result<f64> {
    if model.conditions() != 2 {
        return Err(Error::InvalidParameter(format!(
            "binary classification needs two conditions, model has {}",
            model.conditions()
        )));
    }
    let e = emission_table(series, &model.trees, model.tau, model.alpha);
    let l0 = forward(&e, &model.q0, &model.trans[0])?.1;
    let l1 = forward(&e, &model.q0, &model.trans[1])?.1;
    Ok(1.0 / (1.0 + (l1 - l0).exp()))
}

/// Fraction of time points whose estimated state matches the truth under
/// the best relabeling of estimated states.
pub fn state_accuracy(truth: &[StateSequence], estimate: &[StateSequence], k: usize) -> f64 {
    let mut confusion = vec![vec![0usize; k]; k];
    let mut total = 0;
    for (a, b) in truth.iter().zip(estimate) {
        for (&x, &y) in a.iter().zip(b) {
            confusion[y][x] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return 1.0;
    }
    best_assignment(&confusion) as f64 / total as f64
}

/// Maximum total of `m[i][σ(i)]` over permutations σ; exhaustive for small
/// sizes, greedy otherwise.
fn best_assignment(m: &[Vec<usize>]) -> usize {
    let k = m.len();
    if k <= 8 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0;
        permute(&mut perm, 0, &mut |p| {
            best = best.max(p.iter().enumerate().map(|(i, &j)| m[i][j]).sum());
        });
        return best;
    }
    let mut used_r = vec![false; k];
    let mut used_c = vec![false; k];
    let mut cells: Vec<(usize, usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (m[i][j], i, j))).collect();
    cells.sort_by(|a, b| b.cmp(a));
    let mut total = 0;
    for (v, i, j) in cells {
        if !used_r[i] && !used_c[j] {
            used_r[i] = true;
            used_c[j] = true;
            total += v;
        }
    }
    total
}

fn permute(v: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permute(v, i + 1, f);
        v.swap(i, j);
    }
}

/// Area under the ROC curve of `scores` for binary `labels` (ties count half).
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut pos = 0.0;
    let mut wins = 0.0;
    let mut neg = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li {
            pos += 1.0;
            for (j, &lj) in labels.iter().enumerate() {
                if !lj {
                    wins += match scores[i].partial_cmp(&scores[j]) {
                        Some(std::cmp::Ordering::Greater) => 1.0,
                        Some(std::cmp::Ordering::Equal) => 0.5,
                        _ => 0.0,
                    };
                }
            }
        } else {
            neg += 1.0;
        }
    }
    wins / (pos * neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::random_uniform_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn toy_model(k: usize, p: usize, seed: u64) -> TreeHmmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..k).map(|_| random_uniform_tree(p, &mut rng)).collect();
        let rows = |shift: f64| {
            DMatrix::from_fn(k, k, |i, j| if i == j { 4.0 } else { 1.0 + shift * ((i + j) % k) as f64 })
        };
        let normalize = |mut m: DMatrix<f64>| {
            for r in 0..k {
                let s = m.row(r).sum();
                m.row_mut(r).scale_mut(1.0 / s);
            }
            m
        };
        TreeHmmModel {
            trees,
            q0: vec![1.0 / k as f64; k],
            trans: vec![normalize(rows(0.0)), normalize(rows(1.0))],
            tau: 1.0,
            alpha: 5.0,
            mu_tau: 0.1,
        }
    }

    fn noise_series(t: usize, p: usize, seed: u64, condition: usize) -> HmmSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HmmSeries::new("s", 0, condition, DMatrix::from_fn(t, p, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn forward_matches_path_enumeration() {
        let model = toy_model(3, 4, 1);
        let s = noise_series(5, 4, 2, 0);
        let e = emission_table(&s, &model.trees, model.tau, model.alpha);
        let (_, ll) = forward(&e, &model.q0, &model.trans[0]).unwrap();
        let mut total = 0.0;
        for code in 0..3usize.pow(5) {
            let z: Vec<usize> = (0..5).map(|t| code / 3usize.pow(t) % 3).collect();
            let mut lp = model.q0[z[0]].ln() + e[(0, z[0])];
            for t in 1..5 {
                lp += model.trans[0][(z[t - 1], z[t])].ln() + e[(t, z[t])];
            }
            total += lp.exp();
        }
        assert!((ll - total.ln()).abs() < 1e-10 * ll.abs());
    }

    #[test]
    fn identical_trees_give_identical_emissions() {
        let t = SpanningTree::path(4);
        let y = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(emission_log_density(&y, &t, 0.7, 5.0), emission_log_density(&y, &t.clone(), 0.7, 5.0));
    }

    #[test]
    fn three_node_emission_ordering() {
        // path 0-1-2 has edge gaps 1,1; star at 0 has gaps 1,2
        let y = [0.0, 1.0, 2.0];
        let path = emission_log_density(&y, &SpanningTree::path(3), 0.5, 5.0);
        let star = emission_log_density(&y, &SpanningTree::star(3, 0), 0.5, 5.0);
        assert!(path > star);
    }

    #[test]
    fn flat_limit_removes_state_differences() {
        let y = [0.0, 1.0, 2.0, -0.5];
        let gap = |tau: f64| {
            (emission_log_density(&y, &SpanningTree::path(4), tau, 5.0)
                - emission_log_density(&y, &SpanningTree::star(4, 3), tau, 5.0))
            .abs()
        };
        assert!(gap(1e8) < 1e-6);
        assert!(gap(1e8) < gap(1.0));
    }

    #[test]
    fn single_state_path_is_constant() {
        let mut model = toy_model(1, 4, 3);
        model.trans = vec![DMatrix::from_element(1, 1, 1.0)];
        let s = noise_series(30, 4, 4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(ffbs_states(&s, &model, &mut rng).unwrap().iter().all(|&z| z == 0));
    }

    #[test]
    fn equal_emissions_reproduce_the_markov_prior() {
        let model = toy_model(3, 4, 6);
        let e = DMatrix::zeros(20_000, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = ffbs_from_emissions(&e, &model.q0, &model.trans[1], &mut rng).unwrap();
        let mut counts = DMatrix::<f64>::zeros(3, 3);
        for w in z.windows(2) {
            counts[(w[0], w[1])] += 1.0;
        }
        for i in 0..3 {
            let row_total = counts.row(i).sum();
            for j in 0..3 {
                let p = model.trans[1][(i, j)];
                let sd = (p * (1.0 - p) / row_total).sqrt();
                assert!((counts[(i, j)] / row_total - p).abs() < 5.0 * sd);
            }
        }
    }

    #[test]
    fn identical_transitions_give_one_half() {
        let mut model = toy_model(3, 5, 8);
        model.trans[1] = model.trans[0].clone();
        let s = noise_series(25, 5, 9, 0);
        assert_eq!(classify_condition(&s, &model).unwrap(), 0.5);
    }

    #[test]
    fn classifier_is_label_invariant() {
        let model = toy_model(3, 5, 10);
        let s = noise_series(25, 5, 11, 0);
        let a = classify_condition(&s, &model).unwrap();
        let b = classify_condition(&s, &model.permute_states(&[2, 0, 1])).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn no_data_draws_from_prior() {
        let mut model = toy_model(3, 4, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let draws = 20_000;
        let mut mean = 0.0;
        for _ in 0..draws {
            update_markov_params(&mut model, &[], &[], &mut rng).unwrap();
            model.validate().unwrap();
            mean += model.trans[0][(0, 0)] / draws as f64;
        }
        // Dir(0.5, 0.5, 0.5) has mean 1/3 and variance 2/45
        assert!((mean - 1.0 / 3.0).abs() < 5.0 * (2.0 / 45.0 / draws as f64).sqrt());
    }

    #[test]
    fn posterior_transition_means_follow_counts() {
        let mut model = toy_model(2, 3, 14);
        model.trans.truncate(1);
        let s = noise_series(9, 3, 15, 0);
        let z = vec![vec![0, 0, 0, 1, 1, 0, 0, 1, 1]];
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let draws = 20_000;
        let mut mean = 0.0;
        let mut q0_mean = 0.0;
        for _ in 0..draws {
            update_markov_params(&mut model, std::slice::from_ref(&s), &z, &mut rng).unwrap();
            mean += model.trans[0][(0, 1)] / draws as f64;
            q0_mean += model.q0[0] / draws as f64;
        }
        // from 0: 3 stays, 2 moves; (2 + 0.5) / (5 + 1)
        assert!((mean - 2.5 / 6.0).abs() < 0.01, "{mean}");
        assert!((q0_mean - 1.5 / 2.0).abs() < 0.01, "{q0_mean}");
    }

    #[test]
    fn accuracy_uses_best_relabeling() {
        let truth = vec![vec![0, 0, 1, 1, 2]];
        let est = vec![vec![2, 2, 0, 0, 0]];
        assert_eq!(state_accuracy(&truth, &est, 3), 0.8);
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc(&[0.9, 0.8, 0.1], &[true, true, false]), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[true, false]), 0.0);
        assert_eq!(auc(&[0.5, 0.5], &[true, false]), 0.5);
    }
}
