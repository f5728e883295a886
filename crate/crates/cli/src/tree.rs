use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use serde::Serialize;
use serde_json::json;

use sptree::io::{self, ModelConfig};
use sptree::mode::estimate_mode;
use sptree::sampler::{empirical_mcp, run_chains, ChainConfig, ChainDiagnostics, Scan};
use sptree::weights::{assemble_log_weights, DataMatrix, ShrinkageParams, TreePrior};
use sptree::marginal_connecting_probabilities;

use crate::manifest::{create_dir, Manifest};
use crate::{DataArgs, ScanKind};

#[derive(Args)]
pub struct McpArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Scale at which to evaluate; defaults to the plug-in estimate from the mode tree.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Args)]
pub struct ModeArgs {
    #[command(flatten)]
    pub input: DataArgs,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Full sweeps visit every edge; random sweeps visit a quarter of them.
    #[arg(long, value_enum, default_value_t = ScanKind::Full)]
    pub scan: ScanKind,
    /// Keep the scale fixed at its initial value.
    #[arg(long)]
    pub fix_tau: bool,
}

struct Loaded {
    data: DataMatrix,
    config: ModelConfig,
    prior: TreePrior,
}

fn load(input: &DataArgs) -> Result<Loaded> {
    let (y, names) = io::read_data_csv(&input.data).with_context(|| format!("reading {}", input.data.display()))?;
    let data = if input.raw {
        DataMatrix::raw(y)
    } else {
        DataMatrix::standardize_named(y, names)?
    };
    let (config, base) = match &input.config {
        Some(path) => (
            ModelConfig::from_path(path).with_context(|| format!("reading {}", path.display()))?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (ModelConfig::default(), Default::default()),
    };
    let prior = config.prior.resolve(data.p(), &base)?;
    info!("{} samples, {} variables", data.n(), data.p());
    Ok(Loaded { data, config, prior })
}

pub fn mcp(args: &McpArgs) -> Result<()> {
    let Loaded { data, config, prior } = load(&args.input)?;
    let mode = estimate_mode(&data, &prior, config.alpha, config.tau_init)?;
    let tau = args.tau.unwrap_or(mode.tau_hat);
    let params = ShrinkageParams::new(config.alpha, tau, mode.mu_tau)?;
    let summary = marginal_connecting_probabilities(&assemble_log_weights(&data, &params, &prior)?)?;
    let out = &args.input.out;
    create_dir(out)?;
    io::write_matrix_csv(&out.join("mcp.csv"), &summary.mcp)?;
    io::write_json(
        &out.join("summary.json"),
        &json!({
            "p": data.p(),
            "n": data.n(),
            "alpha": config.alpha,
            "tau": tau,
            "mu_tau": mode.mu_tau,
            "log_z": summary.log_z,
            "shift": summary.shift,
        }),
    )?;
    let mut m = Manifest::new("mcp", json!({ "data": args.input.data, "config": config, "tau": tau }), vec![])?;
    m.add("mcp.csv", "mcp");
    m.add("summary.json", "summary");
    m.write(out)?;
    info!("log Z = {:.6} at tau = {tau:.6}", summary.log_z);
    Ok(())
}

pub fn mode(args: &ModeArgs) -> Result<()> {
    let Loaded { data, config, prior } = load(&args.input)?;
    let mode = estimate_mode(&data, &prior, config.alpha, config.tau_init)?;
    let params = ShrinkageParams::new(config.alpha, mode.tau_hat, mode.mu_tau)?;
    let summary = marginal_connecting_probabilities(&assemble_log_weights(&data, &params, &prior)?)?;
    let out = &args.input.out;
    create_dir(out)?;
    io::write_tree_csv(&out.join("mode_tree.csv"), &mode.tree)?;
    io::write_matrix_csv(&out.join("mcp.csv"), &summary.mcp)?;
    io::write_json(
        &out.join("summary.json"),
        &json!({
            "tau_hat": mode.tau_hat,
            "tau_init": mode.tau_init,
            "mu_tau": mode.mu_tau,
            "log_z": summary.log_z,
            "names": data.names(),
        }),
    )?;
    let mut m = Manifest::new("mode", json!({ "data": args.input.data, "config": config }), vec![])?;
    m.add("mode_tree.csv", "tree");
    m.add("mcp.csv", "mcp");
    m.add("summary.json", "summary");
    m.write(out)?;
    info!("tau_hat = {:.6}", mode.tau_hat);
    Ok(())
}

#[derive(Serialize)]
struct ChainSummary {
    chain: usize,
    draws: usize,
    accept_rate_tau: f64,
    accept_rate_tau_burn_in: f64,
    final_delta: f64,
    ess_tau: f64,
    ess_degree_min: f64,
    ess_degree_mean: f64,
    gram_refreshes: usize,
}

fn chain_summary(chain: usize, draws: usize, d: &ChainDiagnostics) -> ChainSummary {
    let min = d.ess_degree.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = d.ess_degree.iter().sum::<f64>() / d.ess_degree.len().max(1) as f64;
    ChainSummary {
        chain,
        draws,
        accept_rate_tau: d.accept_rate_tau,
        accept_rate_tau_burn_in: d.accept_rate_tau_burn_in,
        final_delta: d.final_delta,
        ess_tau: d.ess_tau,
        ess_degree_min: min,
        ess_degree_mean: mean,
        gram_refreshes: d.gram_refreshes,
    }
}

fn write_degree_trace(path: &Path, traces: &[Vec<u32>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let p = traces.len();
    w.write_record((1..=p).map(|j| format!("node{j}")))?;
    let len = traces.first().map_or(0, Vec::len);
    for i in 0..len {
        w.write_record(traces.iter().map(|t| t[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    anyhow::ensure!(args.chains >= 1, "--chains must be at least 1");
    let Loaded { data, config, prior } = load(&args.input)?;
    let p = data.p();
    let chain_cfg = ChainConfig {
        iterations: args.iters,
        burn_in: args.burnin,
        seed: args.seed,
        thin: args.thin,
        scan: match args.scan {
            ScanKind::Full => Scan::Full,
            ScanKind::Random => Scan::random_quarter(p),
        },
        update_tau: !args.fix_tau,
        tau_init: config.tau_init,
        ..ChainConfig::default()
    };
    let outs = run_chains(&data, &prior, config.alpha, &chain_cfg, args.chains)?;
    let out = &args.input.out;
    create_dir(out)?;
    let mut m = Manifest::new(
        "fit",
        json!({ "data": args.input.data, "config": config, "chain": chain_cfg, "chains": args.chains }),
        vec![args.seed],
    )?;
    let mut summaries = Vec::new();
    for (c, o) in outs.iter().enumerate() {
        let draws = format!("draws_chain{c}.jsonl");
        let tau = format!("tau_trace_chain{c}.csv");
        let degree = format!("degree_trace_chain{c}.csv");
        io::write_draws_jsonl(&out.join(&draws), &o.draws)?;
        io::write_column_csv(&out.join(&tau), "tau", &o.diagnostics.tau_trace)?;
        write_degree_trace(&out.join(&degree), &o.diagnostics.degree_traces)?;
        m.add(draws, "draws");
        m.add(tau, "tau_trace");
        m.add(degree, "degree_trace");
        summaries.push(chain_summary(c, o.draws.len(), &o.diagnostics));
        info!(
            "chain {c}: tau acceptance {:.3}, ESS(tau) {:.1}",
            o.diagnostics.accept_rate_tau, o.diagnostics.ess_tau
        );
    }
    let mcp = empirical_mcp(outs.iter().flat_map(|o| o.draws.iter().map(|d| &d.tree)), p);
    io::write_matrix_csv(&out.join("mcp.csv"), &mcp)?;
    io::write_json(&out.join("diagnostics.json"), &summaries)?;
    m.add("mcp.csv", "mcp");
    m.add("diagnostics.json", "diagnostics");
    m.write(out)?;
    Ok(())
}
