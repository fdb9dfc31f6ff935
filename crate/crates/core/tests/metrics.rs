mod common;

use common::{pairwise_auc, ranking_walk_ap};
use g3ad::eval::{average_precision, roc_auc, ExperimentSummary, MeanStd, RunResult};
use g3ad::{AnomalyGroundTruth, G3adConfig};
use proptest::prelude::*;

/// Scores from a small value set so ties are frequent, and labels with
/// both classes present.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..12).prop_map(|v| v as f64 * 0.125), n),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    })
}

fn distinct_instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    instance().prop_flat_map(|(s, y)| {
        let n = s.len();
        (Just(y), Just(n), Just(s)).prop_perturb(|(y, n, _), mut rng| {
            let mut vals: Vec<f64> = (0..n).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
            for i in (1..n).rev() {
                vals.swap(i, rng.random_range(0..=i));
            }
            (vals, y)
        })
    })
}

fn gt(y: &[u8]) -> AnomalyGroundTruth {
    AnomalyGroundTruth::from_labels(y.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auc_matches_pairwise_oracle_exactly((s, y) in instance()) {
        prop_assert_eq!(roc_auc(&s, &gt(&y)).unwrap(), pairwise_auc(&s, &y));
    }

    #[test]
    fn ap_matches_ranking_walk((s, y) in instance()) {
        let ap = average_precision(&s, &gt(&y)).unwrap();
        prop_assert!((ap - ranking_walk_ap(&s, &y)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ap));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn auc_of_negated_scores_is_complementary((s, y) in distinct_instance()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = roc_auc(&s, &gt(&y)).unwrap() + roc_auc(&neg, &gt(&y)).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_strictly_increasing_transforms((s, y) in instance()) {
        let labels = gt(&y);
        let t: Vec<f64> = s.iter().map(|v| (2.0 * v).exp() + v.powi(3)).collect();
        prop_assert_eq!(roc_auc(&s, &labels).unwrap(), roc_auc(&t, &labels).unwrap());
        prop_assert_eq!(average_precision(&s, &labels).unwrap(), average_precision(&t, &labels).unwrap());
    }

    #[test]
    fn summary_mean_is_arithmetic_mean(aucs in prop::collection::vec(0.0f64..1.0, 1..8)) {
        let runs: Vec<RunResult> = aucs
            .iter()
            .enumerate()
            .map(|(i, &a)| RunResult { seed: i as u64, auc: a, ap: 1.0 - a, loss_history: vec![], wall_time: 0.0 })
            .collect();
        let s = ExperimentSummary::from_runs(&runs, &G3adConfig::default()).unwrap();
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        prop_assert!((s.auc.mean - mean).abs() <= 1e-12);
        prop_assert!(s.auc.std >= 0.0);
        prop_assert!((s.auc.std - s.ap.std).abs() <= 1e-12);
    }
}

#[test]
fn single_run_has_zero_std() {
    assert_eq!(MeanStd::of(&[0.83]).unwrap(), MeanStd { mean: 0.83, std: 0.0 });
}

#[test]
fn fixed_twenty_element_case() {
    let s = [
        0.91, 0.12, 0.55, 0.55, 0.33, 0.78, 0.02, 0.64, 0.55, 0.47, 0.88, 0.12, 0.29, 0.71, 0.05, 0.64, 0.99, 0.38, 0.21,
        0.55,
    ];
    let y = [1, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0];
    assert_eq!(roc_auc(&s, &gt(&y)).unwrap(), pairwise_auc(&s, &y));
    assert!((average_precision(&s, &gt(&y)).unwrap() - ranking_walk_ap(&s, &y)).abs() <= 1e-12);
}
