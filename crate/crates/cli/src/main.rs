//! `g3ad`: synthesize, inject, train, score, evaluate, sweep and plot.

mod commands;
mod files;
mod manifest;
mod plot;
mod settings;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use g3ad::eval::SweepAxis;

use settings::ModelArgs;

#[derive(Parser, Debug)]
#[command(name = "g3ad", version, about = "Unsupervised graph anomaly detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a clustered base graph with attributes.
    Synth(SynthArgs),
    /// Plant clique and attribute-swap anomalies into a graph.
    Inject(InjectArgs),
    /// Train a detector and write its checkpoint, scores and loss history.
    Train(TrainArgs),
    /// Score a graph with a saved checkpoint.
    Score(ScoreArgs),
    /// ROC-AUC and AP of one or more score files.
    Eval(EvalArgs),
    /// Score histogram and loss-curve plots.
    Report(ReportArgs),
    /// Compare configurations over several seeds.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    nodes: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    #[arg(long, default_value_t = 8.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    clusters: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InjectArgs {
    /// Directory holding edges.txt and attributes.csv.
    #[arg(long)]
    graph: PathBuf,
    /// Number of cliques.
    #[arg(long, default_value_t = 5)]
    cliques: usize,
    #[arg(long, default_value_t = 15)]
    clique_size: usize,
    /// Candidates compared per attribute swap.
    #[arg(long, default_value_t = 50)]
    candidates: usize,
    /// Attribute anomalies; defaults to cliques × clique size.
    #[arg(long)]
    attr_anomalies: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    labels: PathBuf,
    /// A single `node,score` file.
    #[arg(long, conflicts_with = "runs", required_unless_present = "runs")]
    scores: Option<PathBuf>,
    /// Several score files, one per seed, summarized as mean±std.
    #[arg(long, num_args = 1.., value_name = "FILE")]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Splits the histogram into normal and anomaly series.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// A loss_history.csv to plot.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    bins: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Defaults to labels.txt inside the graph directory.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// ablation, arch, backbone, readout or lambda.
    #[arg(long)]
    axis: String,
    /// `l1:l2` pairs for the lambda axis, comma separated.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_axis(axis: &str, grid: Option<&str>) -> Result<SweepAxis> {
    let parsed = match axis {
        "ablation" => SweepAxis::Ablation,
        "arch" => SweepAxis::Arch,
        "backbone" => SweepAxis::Backbone,
        "readout" => SweepAxis::Readout,
        "lambda" => {
            let grid = grid.ok_or_else(|| anyhow::anyhow!("--axis lambda needs --grid l1:l2,..."))?;
            let pairs = grid
                .split(',')
                .map(|pair| {
                    let (a, b) = pair
                        .split_once(':')
                        .ok_or_else(|| anyhow::anyhow!("grid entry `{pair}` is not l1:l2"))?;
                    Ok((a.trim().parse()?, b.trim().parse()?))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            SweepAxis::Lambda(pairs)
        }
        other => anyhow::bail!("unknown sweep axis `{other}`"),
    };
    if grid.is_some() && !matches!(parsed, SweepAxis::Lambda(_)) {
        anyhow::bail!("--grid only applies to --axis lambda");
    }
    Ok(parsed)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Inject(a) => commands::inject(&a),
        Command::Train(a) => commands::train(&a),
        Command::Score(a) => commands::score(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Report(a) => commands::report(&a),
        Command::Sweep(a) => commands::sweep(&a),
    }
}
