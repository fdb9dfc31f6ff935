//! Shared oracles and fixtures for the integration suites.
#![allow(dead_code)]

use g3ad::graph::AnomalyGroundTruth;
use g3ad::injection::{inject, synth_base_graph, InjectionConfig, SynthConfig};
use g3ad::numerics::{seeded_rng, Bound, ParamId, ParamSet, Tape, Var};
use g3ad::Graph;
use ndarray::Array2;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Worst element of a gradient comparison.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub param: String,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradReport {
    pub fn passes(&self) -> bool {
        self.max_rel_err < FD_TOLERANCE
    }
}

/// `|analytic − numeric| / (|numeric| + 1e-8)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (numeric.abs() + 1e-8)
}

/// Compares reverse-mode gradients of a scalar loss against central
/// differences for every entry of every parameter in `params_of(state)`.
pub fn grad_check<S>(
    state: &mut S,
    params_of: impl Fn(&mut S) -> &mut ParamSet,
    loss: impl Fn(&S, &mut Tape) -> (Var, Bound),
) -> GradReport {
    let mut tape = Tape::new();
    let (l, bound) = loss(state, &mut tape);
    tape.backward(l).expect("backward");
    let grads = bound.grads(&tape);

    let eval = |s: &S| {
        let mut t = Tape::new();
        let (l, _) = loss(s, &mut t);
        t.scalar(l)
    };

    let ids: Vec<ParamId> = params_of(state).ids().collect();
    let mut report = GradReport {
        max_rel_err: 0.0,
        param: String::new(),
        index: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (k, id) in ids.into_iter().enumerate() {
        let (rows, cols) = params_of(state).get(id).dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = params_of(state).get(id)[[r, c]];
                params_of(state).get_mut(id)[[r, c]] = orig + FD_STEP;
                let plus = eval(state);
                params_of(state).get_mut(id)[[r, c]] = orig - FD_STEP;
                let minus = eval(state);
                params_of(state).get_mut(id)[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let analytic = grads[k][[r, c]];
                let e = rel_err(analytic, numeric);
                report.checked += 1;
                if e > report.max_rel_err || e.is_nan() {
                    report.max_rel_err = if e.is_nan() { f64::INFINITY } else { e };
                    report.param = params_of(state).name(id).to_string();
                    report.index = (r, c);
                    report.analytic = analytic;
                    report.numeric = numeric;
                }
            }
        }
    }
    report
}

pub fn uniform<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
}

/// Connected random graph: a ring plus `extra` random chords.
pub fn random_graph(n: usize, d: usize, extra: usize, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed);
    let x = uniform(n, d, -1.0, 1.0, &mut rng);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            edges.push((u, v));
        }
    }
    Graph::from_edges(x, edges).expect("valid graph")
}

/// The planted-anomaly benchmark used by the detection checks.
pub fn planted_benchmark(graph_seed: u64) -> (Graph, AnomalyGroundTruth) {
    let (base, _) = synth_base_graph(&SynthConfig::new(500, 32, 8.0, 5), &mut seeded_rng(graph_seed)).expect("synth");
    let inj = InjectionConfig {
        clique_size: 5,
        num_cliques: 5,
        attr_candidates: 20,
        num_attr_anomalies: Some(25),
        seed: graph_seed,
    };
    inject(&base, &inj).expect("inject")
}

/// Probability that a random positive outranks a random negative, ties
/// counted as one half, by direct enumeration of pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice_wins = 0u64;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            pos += 1;
        } else {
            neg += 1;
        }
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            if scores[i] > scores[j] {
                twice_wins += 2;
            } else if scores[i] == scores[j] {
                twice_wins += 1;
            }
        }
    }
    twice_wins as f64 * 0.5 / (pos as f64 * neg as f64)
}

/// Walks the descending ranking (ties by index) and sums recall increments
/// times precision.
pub fn ranking_walk_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let total_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut tp = 0.0;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1.0;
        }
        let precision = tp / (k + 1) as f64;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}
