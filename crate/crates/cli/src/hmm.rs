use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sptree::hmm::{self, HmmConfig, HmmSeries, DEFAULT_STATES};
use sptree::io;

use crate::manifest::{create_dir, Manifest};

#[derive(Args)]
pub struct HmmArgs {
    /// Directory holding the series CSVs and `manifest.json`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STATES)]
    pub states: usize,
    #[arg(long, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5.0)]
    pub alpha: f64,
}

/// `manifest.json` of an HMM input directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesManifest {
    pub series: Vec<SeriesEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub file: String,
    pub subject: usize,
    pub condition: usize,
    /// Held-out series are classified but not used for fitting.
    #[serde(default)]
    pub held_out: bool,
}

#[derive(Serialize)]
struct ClassRow<'a> {
    series: &'a str,
    held_out: bool,
    true_condition: usize,
    pr_first: f64,
    decision: usize,
}

pub fn run(args: &HmmArgs) -> Result<()> {
    let mpath = args.input.join("manifest.json");
    let manifest: SeriesManifest = serde_json::from_reader(BufReader::new(
        File::open(&mpath).with_context(|| format!("opening {}", mpath.display()))?,
    ))
    .with_context(|| format!("parsing {}", mpath.display()))?;
    let mut train = Vec::new();
    let mut all = Vec::new();
    for e in &manifest.series {
        let path = args.input.join(&e.file);
        let (y, _) = io::read_data_csv(&path).with_context(|| format!("reading {}", path.display()))?;
        let s = HmmSeries::new(e.file.clone(), e.subject, e.condition, y)?;
        if !e.held_out {
            train.push(s.clone());
        }
        all.push((s, e.held_out));
    }
    anyhow::ensure!(!train.is_empty(), "manifest lists no training series");
    let conditions = manifest.series.iter().map(|e| e.condition).max().unwrap_or(0) + 1;
    let config = HmmConfig {
        states: args.states,
        iterations: args.iters,
        burn_in: args.burnin,
        seed: args.seed,
        alpha: args.alpha,
        ..HmmConfig::default()
    };
    info!("fitting {} series, {conditions} conditions, {} states", train.len(), config.states);
    let fit = hmm::fit(&train, conditions, &config)?;

    let out = &args.out;
    create_dir(out)?;
    let mut m = Manifest::new("hmm", json!({ "input": args.input, "config": config }), vec![args.seed])?;
    for (k, (tree, mcp)) in fit.model.trees.iter().zip(&fit.state_mcp).enumerate() {
        let t = format!("state{k}_tree.csv");
        let c = format!("state{k}_mcp.csv");
        io::write_tree_csv(&out.join(&t), tree)?;
        io::write_matrix_csv(&out.join(&c), mcp)?;
        m.add(t, "state_tree");
        m.add(c, "state_mcp");
    }

    let mut w = csv::Writer::from_path(out.join("states.csv"))?;
    w.write_record(["series", "t", "state"])?;
    for (s, z) in train.iter().zip(&fit.states) {
        for (t, zt) in z.iter().enumerate() {
            w.write_record([s.id.as_str(), &t.to_string(), &zt.to_string()])?;
        }
    }
    w.flush()?;
    m.add("states.csv", "states");

    let mut w = csv::Writer::from_path(out.join("occupancy_trace.csv"))?;
    w.write_record((0..config.states).map(|k| format!("state{k}")))?;
    for row in &fit.occupancy_trace {
        w.write_record(row.iter().map(usize::to_string))?;
    }
    w.flush()?;
    m.add("occupancy_trace.csv", "occupancy_trace");

    io::write_column_csv(&out.join("tau_trace.csv"), "tau", &fit.tau_trace)?;
    m.add("tau_trace.csv", "tau_trace");
    let trans: Vec<Vec<Vec<f64>>> = fit
        .model
        .trans
        .iter()
        .map(|t| t.row_iter().map(|r| r.iter().copied().collect()).collect())
        .collect();
    io::write_json(
        &out.join("transitions.json"),
        &json!({ "q0": fit.model.q0, "trans": trans, "tau": fit.model.tau, "accept_rate_tau": fit.accept_rate_tau }),
    )?;
    m.add("transitions.json", "transitions");
    io::write_json(&out.join("model.json"), &fit.model)?;
    m.add("model.json", "model");

    let mut w = csv::Writer::from_path(out.join("classification.csv"))?;
    for (s, held_out) in &all {
        let probs = hmm::condition_probabilities(s, &fit.model)?;
        let decision = (0..probs.len()).fold(0, |b, g| if probs[g] > probs[b] { g } else { b });
        w.serialize(ClassRow {
            series: &s.id,
            held_out: *held_out,
            true_condition: s.condition,
            pr_first: probs[0],
            decision,
        })?;
    }
    w.flush()?;
    m.add("classification.csv", "classification");
    m.write(out)?;
    Ok(())
}
