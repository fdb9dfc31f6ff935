mod common;

use std::collections::BTreeSet;

use g3ad::graph::normalized_adjacency;
use g3ad::injection::{inject, inject_attributed, inject_topological, InjectionConfig};
use g3ad::model::losses::{a_cor, anomaly_scores, consistency_alignment, correlation_constraint, ScoreInputs};
use g3ad::model::{Ablations, CorrelationReduction, G3adConfig, G3adModel, Readout, TrainOptions};
use g3ad::nn::{build_encoder, BackboneKind, GatLayer, GraphOperators};
use g3ad::numerics::{seeded_rng, ParamSet, Tape};
use g3ad::{load_graph, save_graph, train, AnomalyKind, Execution, Graph};
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;

/// Random simple graph with attributes in `[-10, 10]`.
fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (3usize..=max_n, 1usize..=4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-10.0f64..10.0, n * d),
            prop::collection::vec((0..n, 0..n), 0..3 * n),
        )
            .prop_map(move |(x, edges)| {
                let x = Array2::from_shape_vec((n, d), x).unwrap();
                Graph::from_edges(x, edges.into_iter().filter(|(u, v)| u != v)).unwrap()
            })
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut seeded_rng(seed));
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_adjacency_symmetric_and_bounded(g in graph_strategy(20)) {
        let na = normalized_adjacency(&g);
        prop_assert_eq!(&na, &na.t().to_owned());
        let max_deg = (0..g.n()).map(|i| g.degree(i)).max().unwrap() as f64;
        for row in na.rows() {
            let s = row.sum();
            prop_assert!(s > 0.0);
            prop_assert!(s <= (max_deg + 1.0).sqrt() + 1e-12);
        }
    }

    #[test]
    fn graph_files_round_trip(g in graph_strategy(15)) {
        let dir = tempfile::tempdir().unwrap();
        let (e, a) = (dir.path().join("g.edges"), dir.path().join("g.csv"));
        save_graph(&g, &e, &a).unwrap();
        prop_assert_eq!(load_graph(&e, &a).unwrap().graph, g);
    }

    #[test]
    fn planted_cliques_are_complete(g in graph_strategy(30), p in 2usize..5, q in 0usize..4, seed in any::<u64>()) {
        prop_assume!(p * q <= g.n());
        let (out, records) = inject_topological(&g, p, q, &mut seeded_rng(seed)).unwrap();
        prop_assert_eq!(records.len(), p * q);
        for c in 0..q {
            let members: Vec<usize> = records
                .iter()
                .filter(|r| matches!(r.kind, AnomalyKind::Topological { clique, .. } if clique == c))
                .map(|r| r.node)
                .collect();
            prop_assert_eq!(members.len(), p);
            for &u in &members {
                for &v in &members {
                    prop_assert!(u == v || out.has_edge(u, v));
                }
            }
        }
        for (u, v) in g.edges() {
            prop_assert!(out.has_edge(u, v));
        }
    }

    #[test]
    fn swapped_attributes_copy_a_preexisting_row(g in graph_strategy(30), count in 1usize..4, k in 1usize..5, seed in any::<u64>()) {
        prop_assume!(count <= g.n() && k < g.n());
        let (out, records) = inject_attributed(&g, count, k, &BTreeSet::new(), &mut seeded_rng(seed)).unwrap();
        for r in &records {
            let AnomalyKind::Attributed { source, .. } = r.kind else { panic!("wrong kind") };
            prop_assert_ne!(source, r.node);
            prop_assert_eq!(out.attributes().row(r.node), g.attributes().row(source));
        }
        let targets: BTreeSet<usize> = records.iter().map(|r| r.node).collect();
        for i in (0..g.n()).filter(|i| !targets.contains(i)) {
            prop_assert_eq!(out.attributes().row(i), g.attributes().row(i));
        }
    }

    #[test]
    fn injectors_are_disjoint(p in 2usize..5, q in 0usize..4, attr in 0usize..8, seed in any::<u64>()) {
        let g = common::random_graph(40, 3, 20, seed);
        let cfg = InjectionConfig { clique_size: p, num_cliques: q, attr_candidates: 5, num_attr_anomalies: Some(attr), seed };
        let (_, gt) = inject(&g, &cfg).unwrap();
        prop_assert_eq!(gt.k(), p * q + attr);
        prop_assert_eq!(gt.provenance.len(), gt.k());
    }

    #[test]
    fn attention_rows_sum_to_one(g in graph_strategy(15), seed in any::<u64>()) {
        let ops = GraphOperators::new(&g, true).unwrap();
        let mut params = ParamSet::new();
        let gat = GatLayer::new("gat", g.d(), 3, &mut params, &mut seeded_rng(seed));
        let mut tape = Tape::new();
        let b = params.bind(&mut tape);
        let bo = ops.bind(&mut tape);
        let x = tape.constant(g.attributes().clone());
        let (_, alpha) = gat.forward_with_attention(&mut tape, &b, x, &bo).unwrap();
        for (i, row) in tape.value(alpha).rows().into_iter().enumerate() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
            for (j, &a) in row.iter().enumerate() {
                prop_assert!(a == 0.0 || i == j || g.has_edge(i, j));
            }
        }
    }

    #[test]
    fn backbones_are_permutation_equivariant(g in graph_strategy(12), seed in any::<u64>()) {
        let perm = permutation(g.n(), seed);
        let pg = g.permuted(&perm).unwrap();
        for kind in BackboneKind::ALL {
            let mut params = ParamSet::new();
            let enc = build_encoder(kind, g.d(), 5, 4, &mut params, &mut seeded_rng(seed)).unwrap();
            let embed = |graph: &Graph| {
                let ops = GraphOperators::new(graph, true).unwrap();
                let mut tape = Tape::new();
                let b = params.bind(&mut tape);
                let bo = ops.bind(&mut tape);
                let x = tape.constant(graph.attributes().clone());
                let h = enc.forward(&mut tape, &b, x, &bo).unwrap();
                tape.value(h).clone()
            };
            let (h, ph) = (embed(&g), embed(&pg));
            for (i, &p) in perm.iter().enumerate() {
                for (a, b) in h.row(i).iter().zip(ph.row(p).iter()) {
                    prop_assert!((a - b).abs() < 1e-9, "{} node {}", kind, i);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn correlation_terms_are_bounded(
        (m1, m2, m3) in (2usize..10, 1usize..6).prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c), matrix(r, c)))
    ) {
        for reduction in [CorrelationReduction::Flatten, CorrelationReduction::ColumnMean] {
            let mut tape = Tape::new();
            let (a, b, c) = (tape.constant(m1.clone()), tape.constant(m2.clone()), tape.constant(m3.clone()));
            for (p, q) in [(a, b), (b, c), (a, c)] {
                let v = a_cor(&mut tape, p, q, reduction).unwrap();
                prop_assert!((0.0..=1.0).contains(&tape.scalar(v)));
            }
            let l = correlation_constraint(&mut tape, a, b, c, reduction).unwrap();
            prop_assert!((0.0..=3.0).contains(&tape.scalar(l)));
        }
        // With the variance guard, aCor(M, cM) = 1 - eps / (2 c² Var(M)²) + O(eps²),
        // which is within 1e-9 of one once Var(M) exceeds about 0.045.
        let mean = m1.mean().unwrap();
        let var = m1.mapv(|v| (v - mean).powi(2)).mean().unwrap();
        prop_assume!(var >= 0.05);
        let mut tape = Tape::new();
        let a = tape.constant(m1.clone());
        let same = a_cor(&mut tape, a, a, CorrelationReduction::Flatten).unwrap();
        prop_assert!((tape.scalar(same) - 1.0).abs() <= 1e-9);
        for c in [-3.0, 0.5] {
            let scaled = tape.constant(&m1 * c);
            let v = a_cor(&mut tape, a, scaled, CorrelationReduction::Flatten).unwrap();
            prop_assert!((tape.scalar(v) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn alignment_loss_has_unit_floor(h in (1usize..10, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c)), constant in any::<bool>()) {
        let h = if constant { Array2::from_elem(h.dim(), 1.5) } else { h };
        for readout in [Readout::Mean, Readout::Min, Readout::Max] {
            let mut tape = Tape::new();
            let params = ParamSet::new();
            let b = params.bind(&mut tape);
            let hv = tape.constant(h.clone());
            let (_, l) = consistency_alignment(&mut tape, &b, hv, readout, None, std::f64::consts::E).unwrap();
            prop_assert!(tape.scalar(l) >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn disabled_attribute_term_ignores_reconstruction(
        (x, xh, noise) in (2usize..8, 1usize..4).prop_flat_map(|(n, d)| (matrix(n, d), matrix(n, d), matrix(n, d)))
    ) {
        let n = x.nrows();
        let adjacency = Array2::from_shape_fn((n, n), |(i, j)| if (i + j) % 3 == 0 && i != j { 1.0 } else { 0.0 });
        let a_hat = Array2::from_elem((n, n), 0.25);
        let h_c = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64 * 0.1);
        let e_g = Array2::from_elem((1, 2), 0.3);
        let cfg = G3adConfig { ablations: Ablations::from_disabled("ar").unwrap(), ..G3adConfig::default() };
        let perturbed = &xh + &noise;
        let score = |x_hat: &Array2<f64>| {
            anomaly_scores(
                &ScoreInputs { x: &x, x_hat: Some(x_hat), adjacency: &adjacency, a_hat: Some(&a_hat), h_c: Some(&h_c), e_g: Some(&e_g) },
                &cfg,
            )
            .unwrap()
        };
        prop_assert_eq!(score(&xh), score(&perturbed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn model_losses_nonnegative_and_scores_equivariant(g in graph_strategy(10), seed in any::<u64>()) {
        let cfg = G3adConfig { embed_dim: 6, ..G3adConfig::default() };
        let model = G3adModel::new(&cfg, g.n(), g.d(), seed).unwrap();
        let art = model.evaluate(&g, Execution::Sequential).unwrap();
        prop_assert!(art.losses.attr >= 0.0 && art.losses.topo >= 0.0);
        prop_assert!(art.losses.cons >= 1.0 - 1e-9);
        prop_assert!((0.0..=3.0).contains(&art.losses.cc));
        let perm = permutation(g.n(), seed ^ 0x5eed);
        let pg = g.permuted(&perm).unwrap();
        let ps = model.permuted(&perm).unwrap().score(&pg, Execution::Sequential).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!((art.scores[i] - ps[p]).abs() < 1e-9);
        }
    }
}

#[test]
fn checkpoint_reload_reproduces_scores() {
    let g = common::random_graph(30, 4, 25, 9);
    let cfg = G3adConfig {
        embed_dim: 8,
        readout: Readout::Attention,
        ..G3adConfig::default()
    };
    let opts = TrainOptions {
        epochs: 10,
        ..TrainOptions::default()
    };
    let out = train(&g, &cfg, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    out.model.save(&path).unwrap();
    let reloaded = G3adModel::load(&path).unwrap().score(&g, opts.exec).unwrap();
    for (a, b) in out.artifacts.scores.iter().zip(reloaded.iter()) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn execution_policy_does_not_change_results() {
    let g = common::random_graph(40, 6, 40, 4);
    let cfg = G3adConfig {
        embed_dim: 16,
        ..G3adConfig::default()
    };
    let run = |exec| {
        let opts = TrainOptions {
            epochs: 5,
            exec,
            ..TrainOptions::default()
        };
        train(&g, &cfg, &opts).unwrap().artifacts.scores
    };
    let (s, p) = (run(Execution::Sequential), run(Execution::Parallel));
    for (a, b) in s.iter().zip(p.iter()) {
        assert!((a - b).abs() <= 1e-9);
    }
}
