//! Synthetic benchmark graphs: a planted-partition base graph plus the
//! standard clique and attribute-swap anomaly injections.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AnomalyGroundTruth, AnomalyKind, AnomalyRecord, Graph};
use crate::numerics::seeded_rng;

/// Parameters of a combined topological + attributed injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    /// Nodes per planted clique (`p`).
    pub clique_size: usize,
    /// Number of cliques (`q`).
    pub num_cliques: usize,
    /// Candidates drawn per attribute swap (`k`).
    pub attr_candidates: usize,
    /// Attribute anomalies; `None` means the same count as clique members.
    pub num_attr_anomalies: Option<usize>,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            clique_size: 15,
            num_cliques: 5,
            attr_candidates: 50,
            num_attr_anomalies: None,
            seed: 0,
        }
    }
}

impl InjectionConfig {
    pub fn attr_count(&self) -> usize {
        self.num_attr_anomalies
            .unwrap_or(self.clique_size * self.num_cliques)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.clique_size < 2 {
            return Err(Error::Config("clique size must be at least 2".into()));
        }
        if self.attr_candidates < 1 {
            return Err(Error::Config("attribute candidates must be at least 1".into()));
        }
        let total = self.clique_size * self.num_cliques + self.attr_count();
        if total >= n {
            return Err(Error::Config(format!(
                "{total} anomalies requested but the graph has only {n} nodes"
            )));
        }
        if self.attr_count() > 0 && self.attr_candidates > n - 1 {
            return Err(Error::Config(format!(
                "{} candidates requested from {} other nodes",
                self.attr_candidates,
                n - 1
            )));
        }
        Ok(())
    }
}

/// Plants `q` cliques of `p` distinct nodes each. Members are drawn without
/// replacement across all cliques; existing edges are kept.
pub fn inject_topological<R: Rng + ?Sized>(
    g: &Graph,
    p: usize,
    q: usize,
    rng: &mut R,
) -> Result<(Graph, Vec<AnomalyRecord>)> {
    if q == 0 {
        return Ok((g.clone(), Vec::new()));
    }
    if p < 2 {
        return Err(Error::Config("clique size must be at least 2".into()));
    }
    if p * q > g.n() {
        return Err(Error::Config(format!(
            "{q} cliques of {p} need {} nodes, graph has {}",
            p * q,
            g.n()
        )));
    }
    let members = sample(rng, g.n(), p * q).into_vec();
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    let mut records = Vec::with_capacity(p * q);
    for (c, clique) in members.chunks(p).enumerate() {
        for (a, &u) in clique.iter().enumerate() {
            for &v in &clique[a + 1..] {
                edges.push((u, v));
            }
            records.push(AnomalyRecord {
                node: u,
                kind: AnomalyKind::Topological {
                    clique: c,
                    clique_size: p,
                },
            });
        }
    }
    let out = Graph::from_edges(g.attributes().clone(), edges)?;
    Ok((out, records))
}

/// Index and distance of the candidate whose attribute row is farthest from
/// `target`'s. The first candidate wins ties.
pub fn farthest_candidate(attrs: &Array2<f64>, target: usize, candidates: &[usize]) -> (usize, f64) {
    let x = attrs.row(target);
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for &c in candidates {
        let dist = attrs
            .row(c)
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist > best.1 {
            best = (c, dist);
        }
    }
    best
}

/// Replaces the attributes of `count` targets (never in `exclude`) with those
/// of their farthest node among `k` random candidates. Candidates exclude the
/// target itself and are read from the attributes before any swap.
pub fn inject_attributed<R: Rng + ?Sized>(
    g: &Graph,
    count: usize,
    k: usize,
    exclude: &BTreeSet<usize>,
    rng: &mut R,
) -> Result<(Graph, Vec<AnomalyRecord>)> {
    if count == 0 {
        return Ok((g.clone(), Vec::new()));
    }
    let n = g.n();
    let eligible: Vec<usize> = (0..n).filter(|i| !exclude.contains(i)).collect();
    if count > eligible.len() {
        return Err(Error::Config(format!(
            "{count} attribute anomalies requested, only {} eligible nodes",
            eligible.len()
        )));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::Config(format!("{k} candidates requested from {} other nodes", n - 1)));
    }
    let original = g.attributes();
    let mut attrs = original.clone();
    let mut records = Vec::with_capacity(count);
    for pick in sample(rng, eligible.len(), count) {
        let target = eligible[pick];
        let candidates: Vec<usize> = sample(rng, n - 1, k)
            .into_iter()
            .map(|c| if c >= target { c + 1 } else { c })
            .collect();
        let (source, distance) = farthest_candidate(original, target, &candidates);
        attrs.row_mut(target).assign(&original.row(source));
        records.push(AnomalyRecord {
            node: target,
            kind: AnomalyKind::Attributed {
                source,
                candidates: k,
                distance,
            },
        });
    }
    Ok((g.with_attributes(attrs)?, records))
}

/// Runs both injectors with disjoint targets and returns the abnormal graph
/// and its labels.
pub fn inject(g: &Graph, cfg: &InjectionConfig) -> Result<(Graph, AnomalyGroundTruth)> {
    cfg.validate(g.n())?;
    let mut rng = seeded_rng(cfg.seed);
    let (g1, mut records) = inject_topological(g, cfg.clique_size, cfg.num_cliques, &mut rng)?;
    let taken: BTreeSet<usize> = records.iter().map(|r| r.node).collect();
    let (g2, attr_records) = inject_attributed(&g1, cfg.attr_count(), cfg.attr_candidates, &taken, &mut rng)?;
    records.extend(attr_records);
    let gt = AnomalyGroundTruth::from_records(g2.n(), records)?;
    Ok((g2, gt))
}

/// JSON sidecar describing an injection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionProvenance {
    pub config: InjectionConfig,
    pub n: usize,
    pub num_topological: usize,
    pub num_attributed: usize,
    pub anomalies: Vec<AnomalyRecord>,
}

impl InjectionProvenance {
    pub fn new(cfg: &InjectionConfig, gt: &AnomalyGroundTruth) -> Self {
        let num_topological = gt
            .provenance
            .iter()
            .filter(|r| matches!(r.kind, AnomalyKind::Topological { .. }))
            .count();
        Self {
            config: cfg.clone(),
            n: gt.n(),
            num_topological,
            num_attributed: gt.provenance.len() - num_topological,
            anomalies: gt.provenance.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Planted-partition generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub nodes: usize,
    pub dim: usize,
    pub avg_degree: f64,
    pub clusters: usize,
    /// Expected share of edges that fall inside a cluster.
    pub intra_fraction: f64,
    /// Standard deviation of the per-cluster attribute centers.
    pub center_std: f64,
    /// Standard deviation of per-node attribute noise around its center.
    pub noise_std: f64,
}

impl SynthConfig {
    pub fn new(nodes: usize, dim: usize, avg_degree: f64, clusters: usize) -> Self {
        Self {
            nodes,
            dim,
            avg_degree,
            clusters,
            intra_fraction: 0.9,
            center_std: 1.0,
            noise_std: 0.5,
        }
    }
}

/// Homophilous base graph: nodes split evenly (in random order) into
/// clusters, dense intra-cluster and sparse inter-cluster edges, and
/// attributes drawn around a Gaussian center per cluster.
pub fn synth_base_graph<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<(Graph, Vec<usize>)> {
    let n = cfg.nodes;
    if n == 0 || cfg.dim == 0 {
        return Err(Error::Config("nodes and dim must be at least 1".into()));
    }
    if cfg.clusters == 0 || cfg.clusters > n {
        return Err(Error::Config(format!("clusters must lie in 1..={n}")));
    }
    if !(0.0..=1.0).contains(&cfg.intra_fraction) || !cfg.avg_degree.is_finite() || cfg.avg_degree < 0.0 {
        return Err(Error::Config("avg degree must be >= 0 and intra fraction in [0, 1]".into()));
    }
    if cfg.center_std < 0.0 || cfg.noise_std < 0.0 {
        return Err(Error::Config("attribute scales must be non-negative".into()));
    }

    let mut cluster: Vec<usize> = (0..n).map(|i| i % cfg.clusters).collect();
    cluster.shuffle(rng);
    let mut sizes = vec![0usize; cfg.clusters];
    for &c in &cluster {
        sizes[c] += 1;
    }
    let pairs = |m: usize| (m * m.saturating_sub(1) / 2) as f64;
    let intra_pairs: f64 = sizes.iter().map(|&s| pairs(s)).sum();
    let inter_pairs = pairs(n) - intra_pairs;
    let target_edges = n as f64 * cfg.avg_degree / 2.0;
    let (p_in, p_out) = match (intra_pairs > 0.0, inter_pairs > 0.0) {
        (true, true) => (
            cfg.intra_fraction * target_edges / intra_pairs,
            (1.0 - cfg.intra_fraction) * target_edges / inter_pairs,
        ),
        (true, false) => (target_edges / intra_pairs, 0.0),
        (false, true) => (0.0, target_edges / inter_pairs),
        (false, false) => (0.0, 0.0),
    };
    if p_in > 1.0 || p_out > 1.0 || (target_edges > 0.0 && intra_pairs + inter_pairs == 0.0) {
        return Err(Error::Config(format!(
            "average degree {} is infeasible for {n} nodes in {} clusters",
            cfg.avg_degree, cfg.clusters
        )));
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if cluster[u] == cluster[v] { p_in } else { p_out };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }

    let center = Normal::new(0.0, cfg.center_std).expect("validated std");
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated std");
    let centers = Array2::from_shape_simple_fn((cfg.clusters, cfg.dim), || center.sample(rng));
    let mut attrs = Array2::zeros((n, cfg.dim));
    for (i, mut row) in attrs.outer_iter_mut().enumerate() {
        for (x, &c) in row.iter_mut().zip(centers.row(cluster[i])) {
            *x = c + noise.sample(rng);
        }
    }
    Ok((Graph::from_edges(attrs, edges)?, cluster))
}
