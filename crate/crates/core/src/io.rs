//! File formats: data and matrix CSVs, tree edge lists, run configuration.
//!
//! Tree edge lists are CSV with header `j,k` and 1-based node indices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SpanningTree;
use crate::sampler::PosteriorDraw;
use crate::weights::{ShrinkageParams, TreePrior};

/// Reads a CSV with a header row of variable names; rows are samples.
pub fn read_data_csv(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::Dimension(format!(
                "row {} has {} fields, header has {}",
                rows + 1,
                rec.len(),
                names.len()
            )));
        }
        for field in rec.iter() {
            values.push(parse_f64(field)?);
        }
        rows += 1;
    }
    Ok((DMatrix::from_row_slice(rows, names.len(), &values), names))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidParameter(format!("cannot parse {s:?} as a number: {e}")))
}

/// Writes a data matrix with a header row.
pub fn write_data_csv(path: &Path, y: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for i in 0..y.nrows() {
        w.write_record(y.row(i).iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless square matrix.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(parse_f64).collect::<Result<_>>()?);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix CSV".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Writes a headerless matrix.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    j: usize,
    k: usize,
}

/// Writes `tree` as `j,k` rows, 1-based, `j < k`.
pub fn write_tree_csv(path: &Path, tree: &SpanningTree) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (j, k) in tree.sorted_edges() {
        w.serialize(EdgeRow { j: j + 1, k: k + 1 })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a 1-based `j,k` edge list into a validated tree on `p` nodes.
pub fn read_tree_csv(path: &Path, p: usize) -> Result<SpanningTree> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut edges = Vec::new();
    for row in rdr.deserialize::<EdgeRow>() {
        let row = row?;
        if row.j == 0 || row.k == 0 {
            return Err(Error::NotATree("node indices are 1-based".into()));
        }
        edges.push((row.j - 1, row.k - 1));
    }
    SpanningTree::new(p, edges)
}

#[derive(Serialize, Deserialize)]
struct DrawLine {
    iteration: usize,
    tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<Vec<f64>>,
    log_post: f64,
    edges: Vec<[usize; 2]>,
}

/// Writes draws as JSON lines with 1-based edges.
pub fn write_draws_jsonl(path: &Path, draws: &[PosteriorDraw]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in draws {
        let line = DrawLine {
            iteration: d.iteration,
            tau: d.tau,
            v: d.v.clone(),
            log_post: d.log_post,
            edges: d.tree.edges().iter().map(|&(j, k)| [j + 1, k + 1]).collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads draws written by [`write_draws_jsonl`].
pub fn read_draws_jsonl(path: &Path, p: usize) -> Result<Vec<PosteriorDraw>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: DrawLine = serde_json::from_str(&line)?;
        let edges = d.edges.iter().map(|&[j, k]| (j - 1, k - 1)).collect();
        out.push(PosteriorDraw {
            iteration: d.iteration,
            tree: SpanningTree::new(p, edges)?,
            tau: d.tau,
            v: d.v,
            log_post: d.log_post,
        });
    }
    Ok(out)
}

/// Tree prior as written in a config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorConfig {
    #[default]
    Uniform,
    /// `eta` is a path to a headerless p x p CSV.
    Edge { eta: String },
    /// Degree prior; `v` defaults to uniform weights.
    Degree {
        #[serde(default = "default_alpha_dir")]
        alpha_dir: f64,
        #[serde(default)]
        v: Option<Vec<f64>>,
    },
}

fn default_alpha_dir() -> f64 {
    1.0
}

impl PriorConfig {
    /// Resolves file references relative to `base`.
    pub fn resolve(&self, p: usize, base: &Path) -> Result<TreePrior> {
        let prior = match self {
            PriorConfig::Uniform => TreePrior::Uniform,
            PriorConfig::Edge { eta } => {
                let path = base.join(eta);
                TreePrior::Edge {
                    eta: read_matrix_csv(&path)?,
                }
            }
            PriorConfig::Degree { alpha_dir, v } => match v {
                Some(v) => TreePrior::Degree {
                    v: v.clone(),
                    alpha_dir: *alpha_dir,
                },
                None => TreePrior::degree_uniform(p, *alpha_dir),
            },
        };
        prior.validate(p)?;
        Ok(prior)
    }
}

/// JSON run configuration: `{alpha, tau_init, prior: {kind, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub tau_init: Option<f64>,
    #[serde(default)]
    pub prior: PriorConfig,
}

fn default_alpha() -> f64 {
    ShrinkageParams::DEFAULT_ALPHA
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            tau_init: None,
            prior: PriorConfig::Uniform,
        }
    }
}

impl ModelConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if !(cfg.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", cfg.alpha)));
        }
        Ok(cfg)
    }
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes one value per row under a single named column.
pub fn write_column_csv(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([name])?;
    for v in values {
        w.write_record([format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}
