//! One function per subcommand. Each writes its artifacts first and its
//! manifest last.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use g3ad::eval::{average_precision, roc_auc, sweep as run_sweep, MeanStd};
use g3ad::{
    inject as inject_graph, load_labels, save_graph, save_labels, seeded_rng, synth_base_graph,
    train as train_model, AnomalyGroundTruth, Error as CoreError, G3adModel, InjectionConfig,
    InjectionProvenance, SynthConfig,
};
use serde::Serialize;

use crate::files::{self, read_graph, read_history, read_scores, write_history, write_scores};
use crate::manifest::{RunManifest, Status};
use crate::plot::{loss_curve_svg, Histogram};
use crate::{parse_axis, EvalArgs, InjectArgs, ReportArgs, ScoreArgs, SweepArgs, SynthArgs, TrainArgs};

fn labels_for(path: &Path, n: usize) -> Result<AnomalyGroundTruth> {
    ensure!(path.is_file(), "labels file {} not found", path.display());
    load_labels(path, n).with_context(|| format!("reading labels {}", path.display()))
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig::new(a.nodes as usize, a.dim as usize, a.avg_degree, a.clusters as usize);
    let mut manifest = RunManifest::begin("synth", &cfg, vec![a.seed], &[])?;
    let (g, _) = synth_base_graph(&cfg, &mut seeded_rng(a.seed))?;
    files::create_dir(&a.out)?;
    let (edges, attrs) = files::graph_paths(&a.out);
    save_graph(&g, &edges, &attrs)?;
    manifest.output(edges);
    manifest.output(attrs);
    manifest.finish(&a.out)?;
    println!("synth: {} nodes, {} edges, {} attributes -> {}", g.n(), g.edge_count(), g.d(), a.out.display());
    Ok(())
}

pub fn inject(a: &InjectArgs) -> Result<()> {
    let cfg = InjectionConfig {
        clique_size: a.clique_size,
        num_cliques: a.cliques,
        attr_candidates: a.candidates,
        num_attr_anomalies: a.attr_anomalies,
        seed: a.seed,
    };
    let (edges_in, attrs_in) = files::graph_paths(&a.graph);
    let g = read_graph(&a.graph)?;
    let mut manifest = RunManifest::begin("inject", &cfg, vec![a.seed], &[&edges_in, &attrs_in])?;
    let (injected, gt) = inject_graph(&g, &cfg)?;
    files::create_dir(&a.out)?;
    let (edges, attrs) = files::graph_paths(&a.out);
    save_graph(&injected, &edges, &attrs)?;
    let labels = a.out.join(files::LABELS);
    save_labels(&gt, &labels)?;
    let prov = InjectionProvenance::new(&cfg, &gt);
    let prov_path = a.out.join(files::PROVENANCE);
    prov.save(&prov_path)?;
    for p in [edges, attrs, labels, prov_path] {
        manifest.output(p);
    }
    manifest.finish(&a.out)?;
    println!(
        "inject: {} topological and {} attribute anomalies ({} labeled) -> {}",
        prov.num_topological,
        prov.num_attributed,
        gt.k(),
        a.out.display()
    );
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let settings = a.model.resolve()?;
    let (edges_in, attrs_in) = files::graph_paths(&a.graph);
    let g = read_graph(&a.graph)?;
    let mut manifest = RunManifest::begin("train", &settings, vec![settings.train.seed], &[&edges_in, &attrs_in])?;
    files::create_dir(&a.out)?;
    let history_path = a.out.join(files::LOSS_HISTORY);
    let outcome = match train_model(&g, &settings.model, &settings.train) {
        Ok(o) => o,
        Err(CoreError::Diverged { epoch, history }) => {
            write_history(&history_path, &history)?;
            manifest.status = Status::Diverged;
            manifest.output(&history_path);
            manifest.finish(&a.out)?;
            bail!(
                "training diverged at epoch {epoch}; partial loss history in {}",
                history_path.display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    let model_path = a.out.join(files::MODEL);
    outcome.model.save(&model_path)?;
    let scores_path = a.out.join(files::SCORES);
    write_scores(&scores_path, outcome.artifacts.scores.as_slice().context("scores not contiguous")?)?;
    write_history(&history_path, &outcome.history)?;
    for p in [model_path, scores_path, history_path] {
        manifest.output(p);
    }
    manifest.finish(&a.out)?;
    let last = outcome.history.last().map_or(f64::NAN, |h| h.total);
    println!(
        "train: {} epochs, final loss {last:.6} -> {}",
        outcome.history.len(),
        a.out.display()
    );
    Ok(())
}

pub fn score(a: &ScoreArgs) -> Result<()> {
    let model = G3adModel::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let (edges_in, attrs_in) = files::graph_paths(&a.graph);
    let g = read_graph(&a.graph)?;
    ensure!(
        g.n() == model.n() && g.d() == model.d(),
        "model expects {} nodes with {} attributes, graph has {} and {}",
        model.n(),
        model.d(),
        g.n(),
        g.d()
    );
    let mut manifest = RunManifest::begin("score", model.config(), vec![], &[&a.model, &edges_in, &attrs_in])?;
    let exec = if a.sequential { g3ad::Execution::Sequential } else { g3ad::Execution::Parallel };
    let scores = model.score(&g, exec)?;
    files::create_dir(&a.out)?;
    let scores_path = a.out.join(files::SCORES);
    write_scores(&scores_path, &scores.to_vec())?;
    manifest.output(scores_path);
    manifest.finish(&a.out)?;
    println!("score: {} nodes -> {}", scores.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct Metrics {
    auc: f64,
    ap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ap_std: Option<f64>,
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let sources: Vec<&Path> = match &a.scores {
        Some(p) => vec![p.as_path()],
        None => a.runs.iter().map(|p| p.as_path()).collect(),
    };
    let mut per_run = Vec::with_capacity(sources.len());
    let mut gt: Option<AnomalyGroundTruth> = None;
    for src in &sources {
        ensure!(src.is_file(), "scores file {} not found", src.display());
        let scores = read_scores(src)?;
        let labels = match &gt {
            Some(l) => {
                ensure!(
                    l.n() == scores.len(),
                    "{} has {} scores, expected {}",
                    src.display(),
                    scores.len(),
                    l.n()
                );
                l
            }
            None => gt.insert(labels_for(&a.labels, scores.len())?),
        };
        let auc = roc_auc(&scores, labels).with_context(|| format!("evaluating {}", src.display()))?;
        let ap = average_precision(&scores, labels).with_context(|| format!("evaluating {}", src.display()))?;
        per_run.push((src.to_path_buf(), auc, ap));
    }
    let mut inputs: Vec<&Path> = vec![a.labels.as_path()];
    inputs.extend(sources.iter().copied());
    let mode = if a.scores.is_some() { "single" } else { "runs" };
    let mut manifest = RunManifest::begin("eval", &serde_json::json!({ "mode": mode }), vec![], &inputs)?;

    let aucs: Vec<f64> = per_run.iter().map(|r| r.1).collect();
    let aps: Vec<f64> = per_run.iter().map(|r| r.2).collect();
    let (auc, ap) = (MeanStd::of(&aucs)?, MeanStd::of(&aps)?);
    let metrics = if a.scores.is_some() {
        Metrics {
            auc: auc.mean,
            ap: ap.mean,
            auc_std: None,
            ap_std: None,
        }
    } else {
        Metrics {
            auc: auc.mean,
            ap: ap.mean,
            auc_std: Some(auc.std),
            ap_std: Some(ap.std),
        }
    };

    files::create_dir(&a.out)?;
    let json_path = a.out.join("metrics.json");
    fs::write(&json_path, serde_json::to_string_pretty(&metrics)? + "\n")?;
    let csv_path = a.out.join("metrics.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["source", "auc", "ap", "auc_std", "ap_std"])?;
    for (src, auc, ap) in &per_run {
        w.write_record([src.display().to_string(), auc.to_string(), ap.to_string(), String::new(), String::new()])?;
    }
    if a.scores.is_none() {
        w.write_record([
            "mean±std".to_string(),
            auc.mean.to_string(),
            ap.mean.to_string(),
            auc.std.to_string(),
            ap.std.to_string(),
        ])?;
    }
    w.flush()?;
    manifest.output(json_path);
    manifest.output(csv_path);
    manifest.finish(&a.out)?;

    if a.scores.is_some() {
        println!("auc={:.4} ap={:.4}", metrics.auc, metrics.ap);
    } else {
        println!(
            "auc={:.4}±{:.4} ap={:.4}±{:.4} over {} runs",
            auc.mean,
            auc.std,
            ap.mean,
            ap.std,
            per_run.len()
        );
    }
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    ensure!(a.scores.is_file(), "scores file {} not found", a.scores.display());
    let scores = read_scores(&a.scores)?;
    ensure!(!scores.is_empty(), "{} contains no scores", a.scores.display());
    let gt = a.labels.as_deref().map(|p| labels_for(p, scores.len())).transpose()?;
    let history = a.history.as_deref().map(read_history).transpose()?;

    let mut inputs: Vec<&Path> = vec![a.scores.as_path()];
    inputs.extend(a.labels.as_deref());
    inputs.extend(a.history.as_deref());
    let mut manifest = RunManifest::begin("report", &serde_json::json!({ "bins": a.bins }), vec![], &inputs)?;

    let hist = Histogram::build(&scores, gt.as_ref().map(|g| g.labels.as_slice()), a.bins as usize)?;
    let loss_svg = history.as_deref().map(loss_curve_svg).transpose()?;
    files::create_dir(&a.out)?;
    let svg_path = a.out.join("score_histogram.svg");
    fs::write(&svg_path, hist.to_svg())?;
    let csv_path = a.out.join("score_histogram.csv");
    fs::write(&csv_path, hist.to_csv())?;
    manifest.output(svg_path);
    manifest.output(csv_path);
    if let Some(svg) = loss_svg {
        let path = a.out.join("loss_curve.svg");
        fs::write(&path, svg)?;
        manifest.output(path);
    }
    manifest.finish(&a.out)?;
    for s in &hist.series {
        println!("{}: {} nodes, mean score {:.6}", s.name, s.counts.iter().sum::<usize>(), s.mean);
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    ensure!(!a.seeds.is_empty(), "--seeds must list at least one seed");
    let axis = parse_axis(&a.axis, a.grid.as_deref())?;
    let settings = a.model.resolve()?;
    let (edges_in, attrs_in) = files::graph_paths(&a.graph);
    let labels_path = a.labels.clone().unwrap_or_else(|| a.graph.join(files::LABELS));
    let g = read_graph(&a.graph)?;
    let gt = labels_for(&labels_path, g.n())?;
    let config = serde_json::json!({ "axis": axis, "base": settings });
    let mut manifest = RunManifest::begin("sweep", &config, a.seeds.clone(), &[&edges_in, &attrs_in, &labels_path])?;

    let table = run_sweep(&g, &gt, &settings.model, &axis, &settings.train, &a.seeds, settings.train.exec)?;
    files::create_dir(&a.out)?;
    let md = table.to_markdown();
    let md_path = a.out.join("sweep.md");
    fs::write(&md_path, &md)?;
    let csv_path = a.out.join("sweep.csv");
    table.write_csv(&csv_path)?;
    let json_path = a.out.join("sweep.json");
    fs::write(&json_path, serde_json::to_string_pretty(&table)? + "\n")?;
    for p in [md_path, csv_path, json_path] {
        manifest.output(p);
    }
    manifest.finish(&a.out)?;
    print!("{md}");
    Ok(())
}
