//! Plain-text graph files: a tab-separated edge list, a headerless
//! attribute CSV, and a one-label-per-line file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::{AnomalyGroundTruth, Graph};
use crate::error::{Error, Result};

/// A loaded graph and what was discarded while reading it.
#[derive(Debug, Clone)]
pub struct GraphLoad {
    pub graph: Graph,
    pub dropped_self_loops: usize,
    pub duplicate_edges: usize,
}

fn read_attributes(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::format(path, 0, e.to_string()))?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::format(path, line, e.to_string()))?;
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::format(path, line, format!("expected {w} columns, found {}", record.len())));
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, line, format!("non-numeric attribute `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::format(path, line, format!("non-finite attribute `{field}`")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err(Error::format(path, 0, "attribute file is empty"));
    };
    Array2::from_shape_vec((rows, width), data).map_err(|e| Error::format(path, 0, e.to_string()))
}

/// Reads `u<TAB>v` edges (any whitespace accepted, `#` starts a comment)
/// and a headerless attribute CSV whose row count fixes `n`.
pub fn load_graph(edge_path: impl AsRef<Path>, attr_path: impl AsRef<Path>) -> Result<GraphLoad> {
    let (edge_path, attr_path) = (edge_path.as_ref(), attr_path.as_ref());
    let attributes = read_attributes(attr_path)?;
    let n = attributes.nrows();
    let reader = BufReader::new(File::open(edge_path)?);
    let mut edges = Vec::new();
    let mut dropped_self_loops = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::format(edge_path, line_no, format!("expected two node indices, got `{body}`")));
        }
        let mut ends = [0usize; 2];
        for (slot, f) in ends.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| Error::format(edge_path, line_no, format!("invalid node index `{f}`")))?;
            if *slot >= n {
                return Err(Error::format(
                    edge_path,
                    line_no,
                    format!("node index {slot} out of range for {n} nodes"),
                ));
            }
        }
        if ends[0] == ends[1] {
            dropped_self_loops += 1;
            continue;
        }
        edges.push((ends[0].min(ends[1]), ends[0].max(ends[1])));
    }
    let listed = edges.len();
    let graph = Graph::from_edges(attributes, edges)?;
    let duplicate_edges = listed - graph.edge_count();
    if dropped_self_loops > 0 {
        log::warn!("{}: dropped {dropped_self_loops} self-loop line(s)", edge_path.display());
    }
    Ok(GraphLoad {
        graph,
        dropped_self_loops,
        duplicate_edges,
    })
}

/// Writes the two files read by [`load_graph`]. Output is byte-stable for
/// equal graphs.
pub fn save_graph(g: &Graph, edge_path: impl AsRef<Path>, attr_path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(edge_path)?);
    for (u, v) in g.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(attr_path)?);
    for row in g.attributes().outer_iter() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            // Display for f64 is the shortest string that parses back exactly.
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<AnomalyGroundTruth> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::with_capacity(n);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v = match t {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::format(path, idx + 1, format!("label `{other}` is not 0 or 1"))),
        };
        labels.push(v);
    }
    if labels.len() != n {
        return Err(Error::format(path, labels.len(), format!("expected {n} labels, found {}", labels.len())));
    }
    AnomalyGroundTruth::from_labels(labels)
}

pub fn save_labels(gt: &AnomalyGroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in &gt.labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}
