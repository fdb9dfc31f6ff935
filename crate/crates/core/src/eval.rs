//! Detection metrics and multi-seed experiment drivers.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AnomalyGroundTruth, Graph};
use crate::model::{train, Ablations, Architecture, EpochLosses, G3adConfig, Readout, TrainOptions};
use crate::nn::BackboneKind;
use crate::par::{map_ordered, Execution};

fn check_inputs(scores: &[f64], labels: &AnomalyGroundTruth) -> Result<()> {
    if scores.len() != labels.n() {
        return Err(Error::Metric(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.n()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Metric(format!("score of node {i} is not finite")));
    }
    Ok(())
}

/// Area under the ROC curve as the normalized Mann–Whitney statistic, with
/// tied scores sharing their mean rank.
pub fn roc_auc(scores: &[f64], labels: &AnomalyGroundTruth) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.k();
    let neg = labels.n() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("ROC-AUC needs both anomalies and normal nodes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps every midrank an integer.
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled_rank = (i + 1 + j + 1) as u64;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels.is_anomaly(k)).count() as u64;
        doubled_rank_sum += doubled_rank * tied_pos;
        i = j + 1;
    }
    let pos64 = pos as u64;
    let doubled_u = doubled_rank_sum - pos64 * (pos64 + 1);
    Ok(doubled_u as f64 * 0.5 / (pos as f64 * neg as f64))
}

/// Step-interpolated average precision over the score-descending ranking,
/// ties ordered by ascending node index.
pub fn average_precision(scores: &[f64], labels: &AnomalyGroundTruth) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.k();
    if pos == 0 {
        return Err(Error::Metric("average precision needs at least one anomaly".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, &node) in order.iter().enumerate() {
        if labels.is_anomaly(node) {
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / pos as f64)
}

/// Outcome of training and scoring with one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub auc: f64,
    pub ap: f64,
    pub loss_history: Vec<EpochLosses>,
    /// Seconds spent training and scoring.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Metric("cannot summarize zero runs".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub auc: MeanStd,
    pub ap: MeanStd,
    pub config: G3adConfig,
}

impl ExperimentSummary {
    pub fn from_runs(runs: &[RunResult], config: &G3adConfig) -> Result<Self> {
        let aucs: Vec<f64> = runs.iter().map(|r| r.auc).collect();
        let aps: Vec<f64> = runs.iter().map(|r| r.ap).collect();
        Ok(Self {
            runs: runs.len(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            auc: MeanStd::of(&aucs)?,
            ap: MeanStd::of(&aps)?,
            config: config.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub summary: ExperimentSummary,
    pub runs: Vec<RunResult>,
}

/// Trains and scores one seed.
pub fn run_once(g: &Graph, labels: &AnomalyGroundTruth, cfg: &G3adConfig, opts: &TrainOptions) -> Result<RunResult> {
    let start = Instant::now();
    let out = train(g, cfg, opts)?;
    let scores = out.artifacts.scores.to_vec();
    Ok(RunResult {
        seed: opts.seed,
        auc: roc_auc(&scores, labels)?,
        ap: average_precision(&scores, labels)?,
        loss_history: out.history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// One training run per seed, aggregated in seed order. `seed_exec`
/// controls whether the seeds themselves run concurrently.
pub fn run_protocol(
    g: &Graph,
    labels: &AnomalyGroundTruth,
    cfg: &G3adConfig,
    opts: &TrainOptions,
    seeds: &[u64],
    seed_exec: Execution,
) -> Result<Experiment> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    cfg.validate()?;
    if labels.n() != g.n() {
        return Err(Error::Metric(format!("{} labels for {} nodes", labels.n(), g.n())));
    }
    let results = map_ordered(seeds.to_vec(), seed_exec, |seed| {
        let opts = TrainOptions { seed, ..opts.clone() };
        run_once(g, labels, cfg, &opts).map_err(|e| Error::Seed {
            seed,
            source: Box::new(e),
        })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        summary: ExperimentSummary::from_runs(&runs, cfg)?,
        runs,
    })
}

/// Which configuration dimension a sweep varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// The full model plus the six reconstruction/alignment removals.
    Ablation,
    /// Full, shared and separated encoder arrangements.
    Arch,
    Backbone,
    Readout,
    /// Explicit `(lambda1, lambda2)` pairs.
    Lambda(Vec<(f64, f64)>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Ablation => "ablation",
            SweepAxis::Arch => "arch",
            SweepAxis::Backbone => "backbone",
            SweepAxis::Readout => "readout",
            SweepAxis::Lambda(_) => "lambda",
        }
    }

    /// Labeled configurations derived from `base`.
    pub fn variants(&self, base: &G3adConfig) -> Result<Vec<(String, G3adConfig)>> {
        let with = |f: &dyn Fn(&mut G3adConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        let out: Vec<(String, G3adConfig)> = match self {
            SweepAxis::Ablation => [
                ("G3AD", ""),
                ("w/o AR", "ar"),
                ("w/o TR", "tr"),
                ("w/o CA", "ca"),
                ("w/o AR&CA", "ar,ca"),
                ("w/o TR&CA", "tr,ca"),
                ("w/o AR&TR", "ar,tr"),
            ]
            .into_iter()
            .map(|(label, off)| {
                let a = Ablations::from_disabled(off)?;
                let ablations = Ablations {
                    correlation: base.ablations.correlation,
                    ..a
                };
                Ok((label.to_string(), with(&|c| c.ablations = ablations)))
            })
            .collect::<Result<_>>()?,
            SweepAxis::Arch => Architecture::ALL
                .into_iter()
                .map(|a| {
                    let label = if a == Architecture::Full { "G3AD".to_string() } else { a.to_string() };
                    (label, with(&|c| c.arch = a))
                })
                .collect(),
            SweepAxis::Backbone => BackboneKind::ALL
                .into_iter()
                .map(|b| (b.name().to_uppercase(), with(&|c| c.backbone = b)))
                .collect(),
            SweepAxis::Readout => Readout::ALL
                .into_iter()
                .map(|r| (r.to_string(), with(&|c| c.readout = r)))
                .collect(),
            SweepAxis::Lambda(grid) => grid
                .iter()
                .map(|&(l1, l2)| {
                    (
                        format!("lambda1={l1},lambda2={l2}"),
                        with(&|c| {
                            c.lambda1 = l1;
                            c.lambda2 = l2;
                        }),
                    )
                })
                .collect(),
        };
        if out.is_empty() {
            return Err(Error::Config(format!("sweep axis `{}` has no variants", self.name())));
        }
        for (label, c) in &out {
            c.validate()
                .map_err(|e| Error::Config(format!("variant `{label}`: {e}")))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub summary: ExperimentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| {} | ROC-AUC | AP |", self.axis);
        let _ = writeln!(s, "|---|---|---|");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {:.4}±{:.4} | {:.4}±{:.4} |",
                r.variant, r.summary.auc.mean, r.summary.auc.std, r.summary.ap.mean, r.summary.ap.std
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        w.write_record(["variant", "runs", "auc_mean", "auc_std", "ap_mean", "ap_std"])
            .map_err(csv_io)?;
        for r in &self.rows {
            let s = &r.summary;
            w.write_record([
                r.variant.clone(),
                s.runs.to_string(),
                s.auc.mean.to_string(),
                s.auc.std.to_string(),
                s.ap.mean.to_string(),
                s.ap.std.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the full seed protocol for every variant on `axis`.
pub fn sweep(
    g: &Graph,
    labels: &AnomalyGroundTruth,
    base: &G3adConfig,
    axis: &SweepAxis,
    opts: &TrainOptions,
    seeds: &[u64],
    seed_exec: Execution,
) -> Result<SweepTable> {
    let variants = axis.variants(base)?;
    let mut rows = Vec::with_capacity(variants.len());
    for (variant, cfg) in variants {
        log::info!("sweep {}: {variant}", axis.name());
        let exp = run_protocol(g, labels, &cfg, opts, seeds, seed_exec)?;
        rows.push(SweepRow {
            variant,
            summary: exp.summary,
        });
    }
    Ok(SweepTable {
        axis: axis.name().to_string(),
        rows,
    })
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One CSV row per run: seed, metrics, final loss and timing.
pub fn write_runs_csv(path: impl AsRef<Path>, runs: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["seed", "auc", "ap", "final_loss", "epochs", "wall_time"])
        .map_err(csv_io)?;
    for r in runs {
        let final_loss = r.loss_history.last().map_or(f64::NAN, |e| e.total);
        w.write_record([
            r.seed.to_string(),
            r.auc.to_string(),
            r.ap.to_string(),
            final_loss.to_string(),
            r.loss_history.len().to_string(),
            r.wall_time.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: impl AsRef<Path>, summary: &ExperimentSummary) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(summary)?)?;
    Ok(())
}
