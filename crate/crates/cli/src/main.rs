use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod hmm;
mod manifest;
mod simulate;
mod tree;

#[derive(Parser)]
#[command(name = "sptree", version, about = "Bayesian spanning-tree graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact marginal connecting probabilities and log partition function.
    Mcp(tree::McpArgs),
    /// Posterior sampling of trees and the global scale.
    Fit(tree::FitArgs),
    /// Posterior mode tree and plug-in scale.
    Mode(tree::ModeArgs),
    /// Tree-valued hidden Markov model over a set of series.
    Hmm(hmm::HmmArgs),
    /// Generate synthetic data sets or run the 2-D manifold study.
    Simulate(simulate::SimulateArgs),
    /// Edge-recovery study over a grid of sample sizes.
    Benchmark(simulate::BenchmarkArgs),
}

/// Input data shared by the single-data-set subcommands.
#[derive(Args, Clone)]
pub struct DataArgs {
    /// CSV with a header of variable names, one row per sample.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON model configuration (alpha, tau_init, prior).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the data as given instead of centring and scaling each column.
    #[arg(long)]
    pub raw: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanKind {
    Full,
    Random,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Mcp(a) => tree::mcp(&a),
        Command::Fit(a) => tree::fit(&a),
        Command::Mode(a) => tree::mode(&a),
        Command::Hmm(a) => hmm::run(&a),
        Command::Simulate(a) => simulate::simulate(&a),
        Command::Benchmark(a) => simulate::benchmark(&a),
    }
}
