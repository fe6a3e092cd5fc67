//! `hge`: one binary for the whole pipeline — simulate phylogenetic sequence
//! data, train and evaluate classifiers, export embeddings, and measure
//! delta-hyperbolicity of point clouds.
//!
//! Every subcommand takes `--out` and writes a `resolved_config.json` there
//! capturing all effective settings (defaults included), so a run can be
//! reproduced from its output directory alone.
//!
//! Exit codes: 2 configuration error, 3 I/O error, 4 training divergence,
//! 5 checkpoint/spec mismatch.

use clap::{Args, Parser, Subcommand};
use hge_delta::{
    delta_distribution, histogram, read_points_csv, sample_manifold, write_histogram_csv,
    write_points_csv, write_report_json, DeltaConfig, DeltaError, DeltaReport, DistanceMatrix,
    ManifoldKind, MetricTag, PointCloud,
};
use hge_model::{
    confusion_matrix, load_checkpoint, mcc, predict_all, save_checkpoint, train, Geometry,
    ModelError, ModelInstance, ModelSpec, SeqDataset, TrainConfig,
};
use hge_phylo::{build_homology_split, build_scenario, PhyloError, Scenario, ScenarioParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};

mod failure;
use failure::Failure;

// ---------------------------------------------------------------------------
// command line
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "hge", version, about = "Hyperbolic sequence classifiers and delta-hyperbolicity tools")]
struct Cli {
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print a machine-readable JSON summary on stdout and nothing else
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a phylogenetic sequence classification dataset
    Simulate(SimulateArgs),
    /// Train a classifier on a simulated dataset directory
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split
    Eval(EvalArgs),
    /// Export pre-classifier embeddings for a dataset split
    Embed(EmbedArgs),
    /// Delta-hyperbolicity report for a point cloud or distance matrix
    Delta(DeltaArgs),
    /// Delta-hyperbolicity of synthetic constant-curvature clouds across dimensions
    Calibrate(CalibrateArgs),
}

/// Parse a flag value through the same serde names used in config files
/// (e.g. `hcnn-s`, `homology`).
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unrecognized value {s:?}"))
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario: a, b, c, or homology
    #[arg(long, value_parser = kebab::<Scenario>)]
    scenario: Option<Scenario>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    leaves: Option<usize>,
    /// Fraction of training labels to flip
    #[arg(long)]
    label_noise: Option<f64>,
    /// FASTA file supplying root sequences (default: uniform random DNA)
    #[arg(long)]
    root_fasta: Option<String>,
    /// FASTA file supplying background sequences (default: uniform random DNA)
    #[arg(long)]
    background_fasta: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Geometry: cnn, hcnn-s, hcnn-m, e2h, or h2e
    #[arg(long, value_parser = kebab::<Geometry>)]
    model: Option<Geometry>,
    /// Dataset directory containing train.csv and dev.csv
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    manifold_lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Stop after this many epochs without dev-MCC improvement
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory (uses --split) or a single CSV file
    #[arg(long)]
    data: PathBuf,
    /// Which split CSV to read when --data is a directory
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory (uses --split) or a single CSV file
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeltaArgs {
    /// CSV of points (one row per point) or a square distance matrix
    #[arg(long)]
    input: PathBuf,
    /// Input kind: points or distances
    #[arg(long, default_value = "points")]
    format: String,
    /// Point metric: euclidean, or lorentz (rows are ambient Lorentz coordinates)
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// Curvature for the lorentz metric
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    k: f64,
    /// Points per sampling run
    #[arg(long)]
    ns: Option<usize>,
    /// Independent sampling runs
    #[arg(long)]
    runs: Option<usize>,
    /// Average over all matrix entries instead of the upper triangle
    #[arg(long)]
    avg_all: bool,
    /// Histogram bins for the scaled-delta distribution
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Geometry to sample: euclidean, hyperbolic, or spherical
    #[arg(long, value_parser = kebab::<ManifoldKind>)]
    kind: ManifoldKind,
    /// Curvature (default: 0 euclidean, -1 hyperbolic, 1 spherical)
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    /// Comma-separated ambient dimensions, e.g. 2,200,1000
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// Cloud size per dimension
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    ns: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// config files and shared plumbing
// ---------------------------------------------------------------------------

/// Read a JSON config file, rejecting unknown keys via the target type.
fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::io(format!("reading {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::config(format!("config {}: {e}", p.display())))
        }
    }
}

/// Seed precedence: flag, then config file, then HGE_SEED, then 0.
fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var("HGE_SEED") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::config(format!("HGE_SEED is not a valid seed: {v:?}"))),
    }
}

/// Output directory precedence: flag, then config file, then current dir.
fn resolve_out(flag: Option<PathBuf>, file: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = flag.or(file).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::io(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    std::fs::write(path, text + "\n")
        .map_err(|e| Failure::io(format!("writing {}: {e}", path.display())))
}

/// The summary every subcommand prints: a JSON value under --json, or its
/// fields as plain `key: value` lines otherwise.
fn emit(json: bool, summary: &serde_json::Value) {
    if json {
        println!("{summary}");
    } else if let Some(map) = summary.as_object() {
        for (k, v) in map {
            println!("{k}: {v}");
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let json = cli.json;
    let threads = cli.threads;
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a, threads, json),
        Command::Train(a) => run_train(a, threads, json),
        Command::Eval(a) => run_eval(a, threads, json),
        Command::Embed(a) => run_embed(a, threads, json),
        Command::Delta(a) => run_delta(a, threads, json),
        Command::Calibrate(a) => run_calibrate(a, threads, json),
    };
    if let Err(f) = result {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

/// Size the global worker pool. A no-op when unset: rayon then defaults to
/// available parallelism.
fn init_threads(requested: Option<usize>) -> Result<(), Failure> {
    match requested {
        None => Ok(()),
        Some(0) => Err(Failure::config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}"))),
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateFile {
    scenario: Option<Scenario>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
    seq_len: Option<usize>,
    leaves: Option<usize>,
    label_noise: Option<f64>,
    root_fasta: Option<String>,
    background_fasta: Option<String>,
    split_fractions: Option<(f64, f64, f64)>,
}

#[derive(Serialize)]
struct SimulateResolved {
    command: &'static str,
    scenario: Scenario,
    seed: u64,
    out_dir: String,
    threads: Option<usize>,
    params: ScenarioParams,
}

fn run_simulate(args: SimulateArgs, threads: Option<usize>, json: bool) -> Result<(), Failure> {
    let file: SimulateFile = read_config(args.config.as_deref())?;
    let threads = threads.or(file.threads);
    init_threads(threads)?;
    let scenario = args
        .scenario
        .or(file.scenario)
        .ok_or_else(|| Failure::config("missing --scenario (or \"scenario\" in the config)".into()))?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let out = resolve_out(args.out, file.out_dir)?;

    let defaults = ScenarioParams::default();
    let params = ScenarioParams {
        seq_len: args.seq_len.or(file.seq_len).unwrap_or(defaults.seq_len),
        n_leaves: args.leaves.or(file.leaves).unwrap_or(defaults.n_leaves),
        label_noise: args.label_noise.or(file.label_noise).unwrap_or(defaults.label_noise),
        root_fasta: args.root_fasta.or(file.root_fasta),
        background_fasta: args.background_fasta.or(file.background_fasta),
        split_fractions: file.split_fractions.unwrap_or(defaults.split_fractions),
    };
    let resolved = SimulateResolved {
        command: "simulate",
        scenario,
        seed,
        out_dir: out.display().to_string(),
        threads,
        params: params.clone(),
    };
    write_json(&out.join("resolved_config.json"), &resolved)?;

    let dataset = match scenario {
        Scenario::Homology => build_homology_split(&params, seed),
        kind => build_scenario(kind, &params, seed),
    }
    .map_err(Failure::from)?;
    dataset.write_to_dir(&out).map_err(Failure::from)?;

    let count = |s| dataset.split_records(s).len();
    emit(
        json,
        &serde_json::json!({
            "scenario": scenario,
            "seed": seed,
            "out_dir": out.display().to_string(),
            "records": dataset.records.len(),
            "train": count(hge_phylo::Split::Train),
            "dev": count(hge_phylo::Split::Dev),
            "test": count(hge_phylo::Split::Test),
        }),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    model: Option<Geometry>,
    data: Option<PathBuf>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
    learning_rate: Option<f64>,
    manifold_learning_rate: Option<f64>,
    batch_size: Option<usize>,
    weight_decay: Option<f64>,
    epochs: Option<usize>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    patience: Option<usize>,
    grad_clip: Option<f64>,
}

#[derive(Serialize)]
struct TrainResolved {
    command: &'static str,
    model: Geometry,
    data: String,
    seed: u64,
    out_dir: String,
    threads: Option<usize>,
    train: TrainConfig,
    spec: ModelSpec,
}

fn run_train(args: TrainArgs, threads: Option<usize>, json: bool) -> Result<(), Failure> {
    let file: TrainFile = read_config(args.config.as_deref())?;
    let threads = threads.or(file.threads);
    init_threads(threads)?;
    let geometry = args
        .model
        .or(file.model)
        .ok_or_else(|| Failure::config("missing --model (or \"model\" in the config)".into()))?;
    let data = args
        .data
        .or(file.data)
        .ok_or_else(|| Failure::config("missing --data (or \"data\" in the config)".into()))?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let out = resolve_out(args.out, file.out_dir)?;

    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: args.lr.or(file.learning_rate).unwrap_or(d.learning_rate),
        manifold_learning_rate: args
            .manifold_lr
            .or(file.manifold_learning_rate)
            .unwrap_or(d.manifold_learning_rate),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        weight_decay: args.weight_decay.or(file.weight_decay).unwrap_or(d.weight_decay),
        epochs: args.epochs.or(file.epochs).unwrap_or(d.epochs),
        beta1: file.beta1.unwrap_or(d.beta1),
        beta2: file.beta2.unwrap_or(d.beta2),
        seed,
        patience: args.patience.or(file.patience).or(d.patience),
        grad_clip: file.grad_clip.unwrap_or(d.grad_clip),
    };
    cfg.validate().map_err(Failure::from)?;

    let train_ds = SeqDataset::read_csv(&data.join("train.csv")).map_err(Failure::from)?;
    let dev_ds = SeqDataset::read_csv(&data.join("dev.csv")).map_err(Failure::from)?;
    let seq_len = train_ds.sequences[0].len();
    let num_classes = train_ds.num_classes().max(dev_ds.num_classes());
    let spec = ModelSpec::with_defaults(geometry, seq_len, num_classes);
    spec.validate().map_err(Failure::from)?;

    let resolved = TrainResolved {
        command: "train",
        model: geometry,
        data: data.display().to_string(),
        seed,
        out_dir: out.display().to_string(),
        threads,
        train: cfg.clone(),
        spec: spec.clone(),
    };
    write_json(&out.join("resolved_config.json"), &resolved)?;

    let mut model = ModelInstance::<f32>::assemble(spec, seed).map_err(Failure::from)?;
    let outcome = train(&mut model, &train_ds, &dev_ds, &cfg).map_err(Failure::from)?;

    let mut log = std::fs::File::create(out.join("metrics.jsonl"))
        .map_err(|e| Failure::io(format!("creating metrics.jsonl: {e}")))?;
    for rec in &outcome.log {
        writeln!(log, "{}", serde_json::to_string(rec).expect("serializable record"))
            .map_err(|e| Failure::io(format!("writing metrics.jsonl: {e}")))?;
    }

    let metrics = serde_json::json!({
        "best_epoch": outcome.best_epoch,
        "best_dev_mcc": outcome.best_dev_mcc,
        "epochs_run": outcome.log.len(),
    });
    save_checkpoint(
        &outcome.best_model,
        outcome.best_epoch,
        metrics.clone(),
        &out.join("checkpoint.hge"),
    )
    .map_err(Failure::from)?;

    if let Some(what) = outcome.diverged {
        return Err(Failure::divergence(format!(
            "training diverged ({what}); best checkpoint so far written to {}",
            out.display()
        )));
    }
    emit(json, &metrics);
    Ok(())
}

// ---------------------------------------------------------------------------
// eval / embed
// ---------------------------------------------------------------------------

/// `--data` accepts a dataset directory (resolved through `--split`) or a
/// single CSV file.
fn load_split(data: &Path, split: &str) -> Result<SeqDataset, Failure> {
    let path = if data.is_dir() { data.join(format!("{split}.csv")) } else { data.to_path_buf() };
    SeqDataset::read_csv(&path).map_err(Failure::from)
}

/// A dataset that does not match the checkpointed model is a checkpoint/spec
/// mismatch, not a data error.
fn check_compatible(ds: &SeqDataset, spec: &ModelSpec) -> Result<(), Failure> {
    if let Some(s) = ds.sequences.iter().find(|s| s.len() != spec.seq_len) {
        return Err(Failure::checkpoint(format!(
            "checkpoint expects sequences of length {}, data has length {}",
            spec.seq_len,
            s.len()
        )));
    }
    if ds.num_classes() > spec.num_classes {
        return Err(Failure::checkpoint(format!(
            "checkpoint has {} classes, data has labels up to {}",
            spec.num_classes,
            ds.num_classes() - 1
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalResolved {
    command: &'static str,
    checkpoint: String,
    data: String,
    split: String,
    batch_size: usize,
    seed: u64,
    out_dir: String,
    threads: Option<usize>,
}

fn run_eval(args: EvalArgs, threads: Option<usize>, json: bool) -> Result<(), Failure> {
    init_threads(threads)?;
    let out = resolve_out(args.out, None)?;
    let batch_size = args.batch_size.unwrap_or(256);
    let (model, header) = load_checkpoint(&args.checkpoint).map_err(Failure::from)?;
    let ds = load_split(&args.data, &args.split)?;
    check_compatible(&ds, &header.spec)?;

    write_json(
        &out.join("resolved_config.json"),
        &EvalResolved {
            command: "eval",
            checkpoint: args.checkpoint.display().to_string(),
            data: args.data.display().to_string(),
            split: args.split.clone(),
            batch_size,
            seed: resolve_seed(None, None)?,
            out_dir: out.display().to_string(),
            threads,
        },
    )?;

    let preds = predict_all(&model, &ds, batch_size).map_err(Failure::from)?;
    let (mcc_value, degenerate) = mcc(&preds, &ds.labels).map_err(Failure::from)?;
    let confusion = confusion_matrix(&preds, &ds.labels, header.spec.num_classes);
    let per_class: Vec<serde_json::Value> = (0..header.spec.num_classes)
        .map(|c| {
            serde_json::json!({
                "label": c,
                "actual": confusion[c].iter().sum::<usize>(),
                "predicted": confusion.iter().map(|row| row[c]).sum::<usize>(),
                "correct": confusion[c][c],
            })
        })
        .collect();
    let metrics = serde_json::json!({
        "n": ds.len(),
        "mcc": mcc_value,
        "mcc_degenerate": degenerate,
        "accuracy": hge_model::accuracy(&preds, &ds.labels),
        "confusion": confusion,
        "per_class": per_class,
        "checkpoint_epoch": header.epoch,
    });
    write_json(&out.join("metrics.json"), &metrics)?;
    emit(json, &metrics);
    Ok(())
}

#[derive(Serialize)]
struct EmbedResolved {
    command: &'static str,
    checkpoint: String,
    data: String,
    split: String,
    batch_size: usize,
    seed: u64,
    out_dir: String,
    threads: Option<usize>,
}

fn run_embed(args: EmbedArgs, threads: Option<usize>, json: bool) -> Result<(), Failure> {
    init_threads(threads)?;
    let out = resolve_out(args.out, None)?;
    let batch_size = args.batch_size.unwrap_or(256);
    let (model, header) = load_checkpoint(&args.checkpoint).map_err(Failure::from)?;
    let ds = load_split(&args.data, &args.split)?;
    check_compatible(&ds, &header.spec)?;

    write_json(
        &out.join("resolved_config.json"),
        &EmbedResolved {
            command: "embed",
            checkpoint: args.checkpoint.display().to_string(),
            data: args.data.display().to_string(),
            split: args.split.clone(),
            batch_size,
            seed: resolve_seed(None, None)?,
            out_dir: out.display().to_string(),
            threads,
        },
    )?;

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(ds.len());
    for chunk in ds.sequences.chunks(batch_size.max(1)) {
        let refs: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
        for row in model.embed(&refs).map_err(Failure::from)? {
            points.push(row.iter().map(|&v| v as f64).collect());
        }
    }
    write_points_csv(&out.join("embeddings.csv"), &points).map_err(Failure::from)?;
    let labels: String = ds.labels.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(out.join("labels.csv"), labels)
        .map_err(|e| Failure::io(format!("writing labels.csv: {e}")))?;

    // hyperbolic heads emit full Lorentz ambient coordinates at the final
    // learned curvature; everything else is plain Euclidean
    let hyperbolic = header.spec.geometry.hyperbolic_head();
    let curvature = hyperbolic.then(|| model.curvatures().last().copied().expect("head curvature"));
    let meta = serde_json::json!({
        "geometry": header.spec.geometry,
        "rows": points.len(),
        "dim": points.first().map_or(0, Vec::len),
        "metric": if hyperbolic { MetricTag::LorentzGeodesic } else { MetricTag::Euclidean },
        "curvature": curvature,
    });
    write_json(&out.join("embed_meta.json"), &meta)?;
    emit(json, &meta);
    Ok(())
}

// ---------------------------------------------------------------------------
// delta / calibrate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DeltaResolved {
    command: &'static str,
    input: String,
    format: String,
    metric: String,
    k: Option<f64>,
    bins: usize,
    seed: u64,
    out_dir: String,
    threads: Option<usize>,
    delta: DeltaConfig,
}

fn delta_config(ns: Option<usize>, runs: Option<usize>, seed: u64, avg_all: bool) -> DeltaConfig {
    let d = DeltaConfig::default();
    DeltaConfig {
        n_s: ns.unwrap_or(d.n_s),
        n_runs: runs.unwrap_or(d.n_runs),
        seed,
        avg_all_entries: avg_all,
        ..d
    }
}

fn summarize(report: &DeltaReport) -> serde_json::Value {
    serde_json::json!({
        "n_s": report.n_s,
        "n_runs": report.n_runs,
        "metric": report.metric,
        "delta_worst_rel_mean": report.delta_worst_rel.mean,
        "delta_worst_rel_sd": report.delta_worst_rel.sd,
        "delta_avg_rel_mean": report.delta_avg_rel.mean,
        "delta_avg_rel_sd": report.delta_avg_rel.sd,
    })
}

fn run_delta(args: DeltaArgs, threads: Option<usize>, json: bool) -> Result<(), Failure> {
    init_threads(threads)?;
    let seed = resolve_seed(args.seed, None)?;
    let out = resolve_out(args.out, None)?;
    if !args.input.exists() {
        return Err(Failure::io(format!("input {} does not exist", args.input.display())));
    }
    let rows = read_points_csv(&args.input).map_err(Failure::from)?;

    let cloud = match args.format.as_str() {
        "distances" => PointCloud::Precomputed(
            DistanceMatrix::from_rows(rows, MetricTag::GraphShortestPath)
                .map_err(Failure::from)?,
        ),
        "points" => match args.metric.as_str() {
            "euclidean" => PointCloud::Euclidean(rows),
            "lorentz" => PointCloud::Lorentz(
                rows,
                hge_core::Manifold::new(args.k).map_err(|e| Failure::config(e.to_string()))?,
            ),
            other => return Err(Failure::config(format!("unrecognized metric {other:?}"))),
        },
        other => return Err(Failure::config(format!("unrecognized format {other:?}"))),
    };
    let cfg = delta_config(args.ns, args.runs, seed, args.avg_all);
    let resolved = DeltaResolved {
        command: "delta",
        input: args.input.display().to_string(),
        format: args.format.clone(),
        metric: args.metric.clone(),
        k: (args.metric == "lorentz").then_some(args.k),
        bins: args.bins,
        seed,
        out_dir: out.display().to_string(),
        threads,
        delta: cfg.clone(),
    };
    write_json(&out.join("resolved_config.json"), &resolved)?;

    let report = delta_distribution(&cloud, &cfg).map_err(Failure::from)?;
    write_report_json(&out.join("report.json"), &report).map_err(Failure::from)?;
    write_histogram_csv(&out.join("histogram.csv"), &histogram(&report.distribution, args.bins))
        .map_err(Failure::from)?;
    emit(json, &summarize(&report));
    Ok(())
}

#[derive(Serialize)]
struct CalibrateResolved {
    command: &'static str,
    kind: ManifoldKind,
    k: f64,
    dims: Vec<usize>,
    n: usize,
    bins: usize,
    seed: u64,
    out_dir: String,
    threads: Option<usize>,
    delta: DeltaConfig,
}

fn run_calibrate(args: CalibrateArgs, threads: Option<usize>, json: bool) -> Result<(), Failure> {
    init_threads(threads)?;
    if args.dims.is_empty() {
        return Err(Failure::config("--dims requires at least one dimension".into()));
    }
    let k = args.k.unwrap_or(match args.kind {
        ManifoldKind::Euclidean => 0.0,
        ManifoldKind::Hyperbolic => -1.0,
        ManifoldKind::Spherical => 1.0,
    });
    let seed = resolve_seed(args.seed, None)?;
    let out = resolve_out(args.out, None)?;
    let cfg = delta_config(args.ns, args.runs, seed, false);
    let resolved = CalibrateResolved {
        command: "calibrate",
        kind: args.kind,
        k,
        dims: args.dims.clone(),
        n: args.n,
        bins: args.bins,
        seed,
        out_dir: out.display().to_string(),
        threads,
        delta: cfg.clone(),
    };
    write_json(&out.join("resolved_config.json"), &resolved)?;

    let mut summaries = Vec::new();
    for (i, &dim) in args.dims.iter().enumerate() {
        // decorrelate the clouds while keeping the whole sweep reproducible
        let cloud = sample_manifold(args.kind, k, dim, args.n, seed.wrapping_add(i as u64))
            .map_err(Failure::from)?;
        let report = delta_distribution(&PointCloud::Precomputed(cloud.distances), &cfg)
            .map_err(Failure::from)?;
        write_report_json(&out.join(format!("report_d{dim}.json")), &report)
            .map_err(Failure::from)?;
        write_histogram_csv(
            &out.join(format!("histogram_d{dim}.csv")),
            &histogram(&report.distribution, args.bins),
        )
        .map_err(Failure::from)?;
        let mut s = summarize(&report);
        s["dim"] = serde_json::json!(dim);
        summaries.push(s);
    }
    emit(json, &serde_json::json!({ "kind": args.kind, "k": k, "reports": summaries }));
    Ok(())
}

// keep the error plumbing out of the command bodies
mod failure_impls {
    use super::*;

    impl From<ModelError> for Failure {
        fn from(e: ModelError) -> Self {
            let code = match &e {
                ModelError::Io(_) => 3,
                ModelError::Divergence { .. } => 4,
                ModelError::CheckpointMismatch(_) => 5,
                _ => 2,
            };
            Failure { code, message: e.to_string() }
        }
    }

    impl From<PhyloError> for Failure {
        fn from(e: PhyloError) -> Self {
            let code = match &e {
                PhyloError::Io(_) => 3,
                _ => 2,
            };
            Failure { code, message: e.to_string() }
        }
    }

    impl From<DeltaError> for Failure {
        fn from(e: DeltaError) -> Self {
            Failure { code: 2, message: e.to_string() }
        }
    }
}
