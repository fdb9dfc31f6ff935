//! Attributed undirected graphs and the normalized propagation operator.

mod io;

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_graph, load_labels, save_graph, save_labels, GraphLoad};

/// Undirected simple graph with a dense attribute row per node.
///
/// Adjacency is stored as sorted neighbor lists without self-loops; the
/// dense matrix is materialized on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    attributes: Array2<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from undirected edges. Duplicates and either
    /// orientation of the same pair collapse to one edge.
    pub fn from_edges<I>(attributes: Array2<f64>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = attributes.nrows();
        if let Some(((i, j), _)) = attributes.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Contract(format!("attribute ({i}, {j}) is not finite")));
        }
        let mut sets = vec![BTreeSet::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Contract(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::Contract(format!("self-loop on node {u}")));
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        Ok(Self {
            attributes,
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.attributes.nrows()
    }

    pub fn d(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn attributes(&self) -> &Array2<f64> {
        &self.attributes
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn neighbor_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Dense binary adjacency with a zero diagonal.
    pub fn adjacency(&self) -> Array2<f64> {
        let n = self.n();
        let mut a = Array2::zeros((n, n));
        for (u, ns) in self.neighbors.iter().enumerate() {
            for &v in ns {
                a[[u, v]] = 1.0;
            }
        }
        a
    }

    /// Same topology with replaced attributes.
    pub fn with_attributes(&self, attributes: Array2<f64>) -> Result<Self> {
        if attributes.nrows() != self.n() {
            return Err(Error::Shape {
                op: "with_attributes",
                lhs: self.attributes.dim(),
                rhs: attributes.dim(),
            });
        }
        Self::from_edges(attributes, self.edges())
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::Contract("permutation length differs from node count".into()));
        }
        let mut attrs = Array2::zeros(self.attributes.dim());
        for (i, &p) in perm.iter().enumerate() {
            attrs.row_mut(p).assign(&self.attributes.row(i));
        }
        Self::from_edges(attrs, self.edges().map(|(u, v)| (perm[u], perm[v])))
    }
}

/// `D^-1/2 (A + I) D^-1/2`, with `D` the degree matrix of `A + I`.
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        out[[i, i]] = 1.0 / deg[i];
        for &j in g.neighbors(i) {
            out[[i, j]] = 1.0 / (deg[i] * deg[j]).sqrt();
        }
    }
    out
}

/// Which injector produced an anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnomalyKind {
    Topological { clique: usize, clique_size: usize },
    Attributed { source: usize, candidates: usize, distance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub node: usize,
    #[serde(flatten)]
    pub kind: AnomalyKind,
}

/// Binary node labels plus, when known, how each anomaly was planted.
///
/// Only evaluation reads this; training never sees it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnomalyGroundTruth {
    pub labels: Vec<u8>,
    pub provenance: Vec<AnomalyRecord>,
}

impl AnomalyGroundTruth {
    pub fn from_labels(labels: Vec<u8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Contract(format!("label {} at node {i} is not 0/1", labels[i])));
        }
        Ok(Self {
            labels,
            provenance: Vec::new(),
        })
    }

    /// Labels of `n` nodes with the given records marked anomalous.
    pub fn from_records(n: usize, provenance: Vec<AnomalyRecord>) -> Result<Self> {
        let mut labels = vec![0u8; n];
        for r in &provenance {
            if r.node >= n {
                return Err(Error::Contract(format!("anomaly node {} out of range", r.node)));
            }
            labels[r.node] = 1;
        }
        Ok(Self { labels, provenance })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Number of anomalous nodes.
    pub fn k(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn is_anomaly(&self, i: usize) -> bool {
        self.labels[i] == 1
    }
}
