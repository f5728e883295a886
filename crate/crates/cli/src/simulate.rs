use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use sptree::experiments::{
    generate_hmm_regimes, manifold_uq_experiment, recovery_experiment, ManifoldKind, Method, SyntheticKind,
    SyntheticSpec,
};
use sptree::graph::Edge;
use sptree::io;
use sptree::sampler::ChainConfig;

use crate::hmm::{SeriesEntry, SeriesManifest};
use crate::manifest::{create_dir, Manifest};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimKind {
    SparsePrecision,
    OracleTree,
    Blobs,
    TwoMoons,
    Hmm,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: SimKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of variables (points for the 2-D kinds).
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    /// Samples per data set.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Fraction of non-zero off-diagonal precision entries.
    #[arg(long, default_value_t = 0.03)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Sampler iterations for the 2-D kinds.
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 5.0)]
    pub alpha: f64,
    /// Hidden states for the HMM kind.
    #[arg(long, default_value_t = 3)]
    pub states: usize,
    /// Time points per HMM series.
    #[arg(long, default_value_t = 100)]
    pub t_len: usize,
    /// Training series, and as many held-out series, for the HMM kind.
    #[arg(long, default_value_t = 20)]
    pub series: usize,
    /// Correlation along each state-tree edge for the HMM kind.
    #[arg(long, default_value_t = 0.9)]
    pub edge_corr: f64,
}

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("v{j}")).collect()
}

fn write_edges(path: &Path, edges: impl IntoIterator<Item = Edge>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["j", "k"])?;
    for (j, k) in edges {
        w.write_record([(j + 1).to_string(), (k + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let out = &args.out;
    create_dir(out)?;
    let mut m = Manifest::new("simulate", args, vec![args.seed])?;
    match args.kind {
        SimKind::SparsePrecision | SimKind::OracleTree => {
            let kind = if args.kind == SimKind::OracleTree {
                SyntheticKind::OracleTree { p: args.p }
            } else {
                SyntheticKind::SparsePrecision {
                    p: args.p,
                    sparsity: args.sparsity,
                }
            };
            let spec = SyntheticSpec {
                kind,
                seed: args.seed,
                replicates: args.replicates,
            };
            for r in 0..args.replicates {
                let truth = spec.truth(r)?;
                let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                rng.set_stream(2 * r as u64 + 1);
                let y = truth.sample(args.n, &mut rng)?;
                let (d, t, g) = (format!("data_r{r}.csv"), format!("tree_r{r}.csv"), format!("graph_r{r}.csv"));
                io::write_data_csv(&out.join(&d), &y, &names(args.p))?;
                io::write_tree_csv(&out.join(&t), &truth.t0)?;
                write_edges(&out.join(&g), truth.g0.iter().copied())?;
                m.add(d, "data");
                m.add(t, "true_tree");
                m.add(g, "true_graph");
            }
        }
        SimKind::Blobs | SimKind::TwoMoons => {
            let kind = if args.kind == SimKind::Blobs {
                ManifoldKind::Blobs
            } else {
                ManifoldKind::TwoMoons
            };
            let cfg = ChainConfig {
                iterations: args.iters,
                burn_in: args.burnin,
                seed: args.seed,
                ..ChainConfig::default()
            };
            let res = manifold_uq_experiment(kind, args.p, args.seed, &cfg, args.alpha)?;
            io::write_data_csv(&out.join("points.csv"), &res.points.transpose(), &["x".into(), "y".into()])?;
            io::write_tree_csv(&out.join("mode_tree.csv"), &res.mode_tree)?;
            io::write_matrix_csv(&out.join("mcp.csv"), &res.mcp)?;
            io::write_draws_jsonl(&out.join("draws.jsonl"), &res.draws)?;
            let tau: Vec<f64> = res.draws.iter().map(|d| d.tau).collect();
            io::write_column_csv(&out.join("tau_trace.csv"), "tau", &tau)?;
            for (f, kind) in [
                ("points.csv", "points"),
                ("mode_tree.csv", "tree"),
                ("mcp.csv", "mcp"),
                ("draws.jsonl", "draws"),
                ("tau_trace.csv", "tau_trace"),
            ] {
                m.add(f, kind);
            }
            let high = res.connected_pairs().iter().filter(|(_, v)| *v > 0.9).count();
            info!("{} connected pairs, {high} above 0.9", res.connected_pairs().len());
        }
        SimKind::Hmm => {
            let reg = generate_hmm_regimes(args.states, args.p, args.t_len, args.series, args.edge_corr, args.seed)?;
            let dir = out.join("series");
            create_dir(&dir)?;
            let mut entries = Vec::new();
            let mut truth = csv::Writer::from_path(out.join("true_states.csv"))?;
            truth.write_record(["series", "t", "state"])?;
            let sets = [(&reg.train, &reg.train_states, false), (&reg.test, &reg.test_states, true)];
            for (series, states, held_out) in sets {
                for (s, z) in series.iter().zip(states) {
                    let file = format!("{}.csv", s.id);
                    io::write_data_csv(&dir.join(&file), s.values(), &names(args.p))?;
                    for (t, zt) in z.iter().enumerate() {
                        truth.write_record([file.as_str(), &t.to_string(), &zt.to_string()])?;
                    }
                    entries.push(SeriesEntry {
                        file,
                        subject: s.subject,
                        condition: s.condition,
                        held_out,
                    });
                }
            }
            truth.flush()?;
            io::write_json(&dir.join("manifest.json"), &SeriesManifest { series: entries })?;
            for (k, t) in reg.trees.iter().enumerate() {
                let f = format!("true_state{k}_tree.csv");
                io::write_tree_csv(&out.join(&f), t)?;
                m.add(f, "true_state_tree");
            }
            m.add("series/manifest.json", "series_manifest");
            m.add("true_states.csv", "true_states");
        }
    }
    m.write(out)?;
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchKind {
    SparsePrecision,
    OracleTree,
}

#[derive(Args, Serialize)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, default_value_t = BenchKind::SparsePrecision)]
    pub kind: BenchKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, default_value_t = 0.03)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,200,400")]
    pub n_grid: Vec<usize>,
    /// Comma-separated methods: `mode`, `mcp:<level>`, `threshold:<level>`.
    #[arg(long, value_delimiter = ',', default_value = "mode,threshold:0.5,threshold:0.9")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 5.0)]
    pub alpha: f64,
}

pub fn parse_method(s: &str) -> Result<Method> {
    let (name, level) = match s.split_once(':') {
        Some((n, l)) => (n, Some(l.parse::<f64>()?)),
        None => (s, None),
    };
    Ok(match (name, level) {
        ("mode", None) => Method::Mode,
        ("mcp", l) => Method::Mcp { level: l.unwrap_or(0.5) },
        ("threshold", Some(level)) => Method::Threshold { level },
        _ => bail!("unknown method {s:?}; expected mode, mcp:<level> or threshold:<level>"),
    })
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    let methods: Vec<Method> = args.methods.iter().map(|s| parse_method(s)).collect::<Result<_>>()?;
    let kind = match args.kind {
        BenchKind::SparsePrecision => SyntheticKind::SparsePrecision {
            p: args.p,
            sparsity: args.sparsity,
        },
        BenchKind::OracleTree => SyntheticKind::OracleTree { p: args.p },
    };
    let spec = SyntheticSpec {
        kind,
        seed: args.seed,
        replicates: args.replicates,
    };
    info!("{} replicates over n = {:?}", args.replicates, args.n_grid);
    let report = recovery_experiment(&spec, &methods, &args.n_grid, args.alpha)?;
    let out = &args.out;
    create_dir(out)?;

    let mut w = csv::Writer::from_path(out.join("recovery_rows.csv"))?;
    w.write_record(["n", "replicate", "method", "missed_tree", "false_edges", "combined", "estimated_edges", "true_edges"])?;
    for r in &report.rows {
        let e = &r.errors;
        w.write_record([
            r.n.to_string(),
            r.replicate.to_string(),
            r.method.clone(),
            e.missed_tree.to_string(),
            e.false_edges.to_string(),
            e.combined.to_string(),
            e.estimated_edges.to_string(),
            e.true_edges.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("recovery_summary.csv"))?;
    for s in &report.summary {
        w.serialize(s)?;
    }
    w.flush()?;

    let mut m = Manifest::new(
        "benchmark",
        json!({ "args": args, "spec": spec, "methods": methods }),
        vec![args.seed],
    )?;
    m.add("recovery_rows.csv", "recovery_rows");
    m.add("recovery_summary.csv", "recovery_summary");
    m.write(out)?;
    Ok(())
}
