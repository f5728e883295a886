//! Bayesian spanning-tree graphical model.
//!
//! Exact tree-distribution computations via the matrix-tree theorem, a
//! cut-and-reconnect Gibbs sampler with generalized double Pareto edge
//! densities, posterior-mode estimation, a hidden Markov model whose states
//! are trees, and simulation helpers.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod hmm;
pub mod io;
pub mod mode;
pub mod sampler;
pub mod weights;

pub use distribution::{
    enumerate_trees, log_partition, marginal_connecting_probabilities, tree_log_posterior_unnormalized,
    TreePosteriorSummary,
};
pub use error::{Error, Result};
pub use graph::{canonical, CutPartition, Edge, IncidenceMatrix, SpanningTree};
pub use mode::{oracle_tree, prim_mode, separability_delta, tau_hat};
pub use sampler::{run_chain, run_chains, ChainConfig, ChainDiagnostics, ChainOutput, PosteriorDraw, Scan};
pub use weights::{
    assemble_log_weights, gdp_log_marginal, DataMatrix, LogWeightMatrix, PairwiseDistances, ShrinkageParams,
    TreePrior,
};
