//! File layout of a graph directory and the CSV artifacts the commands
//! exchange.

use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use g3ad::model::EpochLosses;
use g3ad::{load_graph, Graph};
use sha2::{Digest, Sha256};

pub const EDGES: &str = "edges.txt";
pub const ATTRIBUTES: &str = "attributes.csv";
pub const LABELS: &str = "labels.txt";
pub const PROVENANCE: &str = "provenance.json";
pub const MANIFEST: &str = "manifest.json";
pub const MODEL: &str = "model.json";
pub const SCORES: &str = "scores.csv";
pub const LOSS_HISTORY: &str = "loss_history.csv";

/// Edge and attribute paths inside a graph directory.
pub fn graph_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(EDGES), dir.join(ATTRIBUTES))
}

pub fn read_graph(dir: &Path) -> Result<Graph> {
    let (edges, attrs) = graph_paths(dir);
    for p in [&edges, &attrs] {
        ensure!(p.is_file(), "missing graph file {}", p.display());
    }
    let load = load_graph(&edges, &attrs).with_context(|| format!("loading graph from {}", dir.display()))?;
    if load.dropped_self_loops > 0 || load.duplicate_edges > 0 {
        log::warn!(
            "{}: dropped {} self-loops and {} duplicate edges",
            edges.display(),
            load.dropped_self_loops,
            load.duplicate_edges
        );
    }
    Ok(load.graph)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256(path: &Path) -> Result<String> {
    let mut reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let read = reader.read(&mut buf)?;
        if read == 0 {
            break;
        }
        hasher.update(&buf[..read]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn write_scores(path: &Path, scores: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["node", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `node,score` CSV whose nodes are exactly `0..n` in order.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening scores {}", path.display()))?;
    let headers = r.headers()?.clone();
    ensure!(
        headers.iter().map(str::trim).eq(["node", "score"]),
        "{}: expected header `node,score`",
        path.display()
    );
    let mut scores = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let node: usize = record[0]
            .trim()
            .parse()
            .with_context(|| format!("{}: row {}: bad node id", path.display(), i + 1))?;
        if node != i {
            bail!("{}: row {} has node {node}, expected {i}", path.display(), i + 1);
        }
        let score: f64 = record[1]
            .trim()
            .parse()
            .with_context(|| format!("{}: row {}: bad score", path.display(), i + 1))?;
        scores.push(score);
    }
    Ok(scores)
}

pub fn write_history(path: &Path, history: &[EpochLosses]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for h in history {
        w.serialize(h)?;
    }
    if history.is_empty() {
        w.write_record(["epoch", "attr", "topo", "cons", "cc", "total"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<EpochLosses>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening history {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<EpochLosses>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}
