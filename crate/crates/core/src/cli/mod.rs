//! The `segkit` command line: `refine`, `ensemble`, `eval` and `stats`.
//!
//! Settings come from an optional TOML file (`--config`) and are overridden
//! by flags. Each run writes `<output>.config.toml` with the resolved
//! settings next to its main output. Exit codes: 0 on success, 1 for
//! internal failures, 2 for usage or input errors.

mod config;

pub use config::{sidecar_path, PredictorKind, RefineSettings, RunConfig, Sidecar, StatsSettings};

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evalmap::{evaluate, AreaSource, IouOn};
use crate::fusion::{ensemble, model_weights, Detection, ModelCandidate, NmsMethod, WeightStrategy};
use crate::ingest::{self, FieldRecord};
use crate::mask::{binarize, mask_iou, rle_encode, BBox, ScoreField};
use crate::refine::{
    subdivision_render, synthetic_corpus, IdentityPredictor, OracleFieldPredictor, PointPredictor,
    SubdivisionConfig,
};

#[derive(Debug, Parser)]
#[command(name = "segkit", version, about = "Mask rendering, ensembling and evaluation tools")]
pub struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render coarse mask logits to full resolution by adaptive subdivision.
    Refine(RefineArgs),
    /// Fuse several results files with score-weighted soft-NMS.
    Ensemble(EnsembleArgs),
    /// Mask AP of a results file against a COCO dataset.
    Eval(EvalArgs),
    /// Box-size histogram of a COCO dataset.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Coarse logit fields (JSON with an `instances` list).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub fields: Option<PathBuf>,
    /// High-resolution reference fields for the oracle predictor, one per instance.
    #[arg(long, requires = "fields")]
    pub oracle: Option<PathBuf>,
    /// Use the built-in 30-shape synthetic corpus instead of input files.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorKind>,
    #[arg(long)]
    pub subdivision_k: Option<usize>,
    #[arg(long)]
    pub target_side: Option<usize>,
    #[arg(long)]
    pub start_side: Option<usize>,
    /// Rendered masks, as a COCO results file.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// `PATH=SCORE` pairs: a results file and its model's validation mAP.
    #[arg(long = "input", required = true, value_parser = parse_input)]
    pub inputs: Vec<(PathBuf, f64)>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub strategy: Option<WeightStrategy>,
    #[arg(long)]
    pub nms_method: Option<NmsMethod>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    pub score_floor: Option<f64>,
    /// Run soft-NMS across categories.
    #[arg(long)]
    pub class_agnostic: bool,
    #[arg(long)]
    pub merge_masks: bool,
    #[arg(long)]
    pub cluster_iou: Option<f64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    /// Overlap measure used for matching.
    #[arg(long, value_parser = ["mask", "bbox"])]
    pub iou_on: Option<String>,
    /// Area deciding small/medium/large membership.
    #[arg(long, value_parser = ["mask", "bbox"])]
    pub bucket_area: Option<String>,
    /// JSON report; a flat text report is written alongside with a `.txt` extension.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Number of images to sample (all when at least the dataset size).
    #[arg(long)]
    pub sample_n: Option<usize>,
    /// Histogram CSV; `<output>.summary.json` receives the median.
    #[arg(long, short)]
    pub output: PathBuf,
}

fn parse_input(s: &str) -> std::result::Result<(PathBuf, f64), String> {
    let (path, score) = s
        .rsplit_once('=')
        .ok_or_else(|| format!("expected PATH=SCORE, got `{s}`"))?;
    let score: f64 = score.parse().map_err(|_| format!("invalid score `{score}`"))?;
    if !score.is_finite() {
        return Err(format!("score must be finite, got `{score}`"));
    }
    Ok((PathBuf::from(path), score))
}

/// Runs the parsed command line, printing progress to `out`.
pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    apply_overrides(&mut cfg, &cli.command)?;
    cfg.validate()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Refine(args) => cmd_refine(args, &cfg, out),
        Command::Ensemble(args) => cmd_ensemble(args, &cfg, out),
        Command::Eval(args) => cmd_eval(args, &cfg, out),
        Command::Stats(args) => cmd_stats(args, &cfg, out),
    })
}

fn apply_overrides(cfg: &mut RunConfig, command: &Command) -> Result<()> {
    fn set<T: Copy>(slot: &mut T, value: Option<T>) {
        if let Some(v) = value {
            *slot = v;
        }
    }
    match command {
        Command::Refine(a) => {
            let s = &mut cfg.refine;
            set(&mut s.subdivision_k, a.subdivision_k);
            set(&mut s.target_side, a.target_side);
            set(&mut s.start_side, a.start_side);
            set(&mut s.predictor, a.predictor);
        }
        Command::Ensemble(a) => {
            let e = &mut cfg.ensemble;
            set(&mut e.theta_min, a.theta_min);
            set(&mut e.theta_max, a.theta_max);
            set(&mut e.strategy, a.strategy);
            set(&mut e.nms.method, a.nms_method);
            set(&mut e.nms.sigma, a.sigma);
            set(&mut e.nms.iou_threshold, a.iou_threshold);
            set(&mut e.nms.score_floor, a.score_floor);
            set(&mut e.cluster_iou, a.cluster_iou);
            if a.class_agnostic {
                e.nms.per_category = false;
            }
            if a.merge_masks {
                e.merge_masks = true;
            }
        }
        Command::Eval(a) => {
            if let Some(v) = &a.iou_on {
                cfg.eval.iou_on = if v == "bbox" { IouOn::Bbox } else { IouOn::Mask };
            }
            if let Some(v) = &a.bucket_area {
                cfg.eval.bucket_area = if v == "bbox" { AreaSource::Bbox } else { AreaSource::Mask };
            }
        }
        Command::Stats(a) => {
            set(&mut cfg.stats.bin_width, a.bin_width);
            set(&mut cfg.stats.sample_n, a.sample_n);
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Serialize(e.to_string()))
}

fn say(out: &mut (dyn Write + Send), line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::Serialize(e.to_string()))
}

/// One rendering job.
struct RenderJob {
    record: FieldRecord,
    coarse: ScoreField,
    reference: Option<ScoreField>,
}

#[derive(Debug, Serialize)]
struct RefineSummary {
    instances: usize,
    /// Mean IoU of rendered masks against the reference masks, when known.
    mean_iou: Option<f64>,
    /// Same for plain bilinear upsampling of the coarse fields.
    mean_iou_bilinear: Option<f64>,
}

fn synthetic_jobs(sub: &SubdivisionConfig) -> Result<Vec<RenderJob>> {
    synthetic_corpus()
        .iter()
        .enumerate()
        .map(|(i, shape)| {
            let coarse = shape.coarse_field(sub.start_side)?;
            let side = sub.target_side as f64;
            Ok(RenderJob {
                record: FieldRecord {
                    image_id: i as u64 + 1,
                    category_id: 1,
                    score: 1.0,
                    bbox: BBox::new(0.0, 0.0, side, side)?,
                    width: coarse.width(),
                    height: coarse.height(),
                    logits: coarse.logits().to_vec(),
                },
                coarse,
                reference: Some(shape.ground_truth_field(sub.target_side)?),
            })
        })
        .collect()
}

fn file_jobs(fields: &Path, oracle: Option<&Path>) -> Result<Vec<RenderJob>> {
    let coarse = ingest::load_fields(fields)?;
    let references = match oracle {
        Some(p) => {
            let refs = ingest::load_fields(p)?;
            if refs.instances.len() != coarse.instances.len() {
                return Err(Error::LengthMismatch {
                    what: "coarse and oracle instances",
                    left: coarse.instances.len(),
                    right: refs.instances.len(),
                });
            }
            refs.instances.iter().map(|r| r.field().map(Some)).collect::<Result<Vec<_>>>()?
        }
        None => vec![None; coarse.instances.len()],
    };
    coarse
        .instances
        .into_iter()
        .zip(references)
        .map(|(record, reference)| {
            Ok(RenderJob {
                coarse: record.field()?,
                record,
                reference,
            })
        })
        .collect()
}

pub fn cmd_refine(args: &RefineArgs, cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<()> {
    let sub = cfg.refine.subdivision();
    let jobs = match &args.fields {
        Some(fields) => file_jobs(fields, args.oracle.as_deref())?,
        None => synthetic_jobs(&sub)?,
    };
    if cfg.refine.predictor == PredictorKind::Oracle && jobs.iter().any(|j| j.reference.is_none()) {
        return Err(Error::InvalidConfig(
            "the oracle predictor needs reference fields (--oracle or --synthetic)".into(),
        ));
    }

    let rendered: Vec<(Detection, Option<(f64, f64)>)> = jobs
        .par_iter()
        .map(|job| {
            let predictor: Box<dyn PointPredictor> = match (cfg.refine.predictor, &job.reference) {
                (PredictorKind::Oracle, Some(r)) => Box::new(OracleFieldPredictor::new(r.clone())),
                _ => Box::new(IdentityPredictor),
            };
            let field = subdivision_render(&job.coarse, predictor.as_ref(), &sub)?;
            let mask = binarize(&field, 0.0);
            let ious = match &job.reference {
                Some(r) if r.width() == sub.target_side && r.height() == sub.target_side => {
                    let truth = binarize(r, 0.0);
                    let plain = binarize(&job.coarse.resize(sub.target_side, sub.target_side)?, 0.0);
                    Some((mask_iou(&mask, &truth)?, mask_iou(&plain, &truth)?))
                }
                _ => None,
            };
            let rec = &job.record;
            let det = Detection::new(rec.image_id, rec.category_id, rec.score, rec.bbox).with_mask(rle_encode(&mask));
            Ok((det, ious))
        })
        .collect::<Result<_>>()?;

    let dets: Vec<Detection> = rendered.iter().map(|(d, _)| d.clone()).collect();
    ingest::write_results(&args.output, &dets)?;

    let ious: Vec<(f64, f64)> = rendered.iter().filter_map(|(_, i)| *i).collect();
    let mean = |f: fn(&(f64, f64)) -> f64| {
        (!ious.is_empty() && ious.len() == rendered.len())
            .then(|| ious.iter().map(f).sum::<f64>() / ious.len() as f64)
    };
    let summary = RefineSummary {
        instances: rendered.len(),
        mean_iou: mean(|p| p.0),
        mean_iou_bilinear: mean(|p| p.1),
    };
    write_file(&suffixed(&args.output, ".summary.json"), json(&summary)?.as_bytes())?;

    let mut inputs: Vec<String> = args.fields.iter().map(|p| p.display().to_string()).collect();
    inputs.extend(args.oracle.iter().map(|p| p.display().to_string()));
    if args.synthetic {
        inputs.push("synthetic-corpus".into());
    }
    Sidecar {
        command: "refine",
        seed: cfg.seed,
        threads: cfg.threads,
        inputs,
        settings: &cfg.refine,
    }
    .write(&args.output)?;

    say(out, format_args!("rendered {} instances", summary.instances))?;
    if let (Some(r), Some(b)) = (summary.mean_iou, summary.mean_iou_bilinear) {
        say(out, format_args!("mean_iou = {r:.6}"))?;
        say(out, format_args!("mean_iou_bilinear = {b:.6}"))?;
    }
    Ok(())
}

pub fn cmd_ensemble(args: &EnsembleArgs, cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<()> {
    let models: Vec<ModelCandidate> = args
        .inputs
        .iter()
        .map(|(path, score)| {
            Ok(ModelCandidate::new(
                path.display().to_string(),
                *score,
                ingest::load_results(path)?,
            ))
        })
        .collect::<Result<_>>()?;

    let image_sets: Vec<BTreeSet<u64>> = models
        .iter()
        .map(|m| m.detections.iter().map(|d| d.image_id).collect())
        .collect();
    for (m, set) in models.iter().zip(&image_sets).skip(1) {
        if set != &image_sets[0] {
            eprintln!(
                "warning: {} covers different image ids than {}",
                m.model_id, models[0].model_id
            );
        }
    }

    let weights = model_weights(&models, &cfg.ensemble)?;
    for (m, w) in models.iter().zip(&weights) {
        say(out, format_args!("weight {} = {w:.6}", m.model_id))?;
    }
    let fused = ensemble(&models, &cfg.ensemble)?;
    ingest::write_results(&args.output, &fused)?;

    #[derive(Serialize)]
    struct EnsembleSettings<'a> {
        scores: Vec<f64>,
        weights: &'a [f64],
        #[serde(flatten)]
        config: &'a crate::fusion::EnsembleConfig,
    }
    Sidecar {
        command: "ensemble",
        seed: cfg.seed,
        threads: cfg.threads,
        inputs: args.inputs.iter().map(|(p, _)| p.display().to_string()).collect(),
        settings: &EnsembleSettings {
            scores: args.inputs.iter().map(|(_, s)| *s).collect(),
            weights: &weights,
            config: &cfg.ensemble,
        },
    }
    .write(&args.output)?;
    say(out, format_args!("wrote {} detections", fused.len()))
}

pub fn cmd_eval(args: &EvalArgs, cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<()> {
    let dataset = ingest::load_dataset(&args.gt)?;
    for w in dataset.bbox_warnings() {
        eprintln!("warning: {w}");
    }
    let gts = dataset.ground_truth()?;
    let dets = ingest::load_results(&args.results)?;
    let report = evaluate(&gts, &dets, &cfg.eval)?;

    write_file(&args.output, json(&report)?.as_bytes())?;
    let text = report.to_text();
    write_file(&args.output.with_extension("txt"), text.as_bytes())?;
    Sidecar {
        command: "eval",
        seed: cfg.seed,
        threads: cfg.threads,
        inputs: vec![args.gt.display().to_string(), args.results.display().to_string()],
        settings: &cfg.eval,
    }
    .write(&args.output)?;
    write!(out, "{text}").map_err(|e| Error::Serialize(e.to_string()))?;
    if !report.categories_without_gt.is_empty() {
        say(
            out,
            format_args!(
                "note: categories {:?} have no ground truth and are excluded from the means",
                report.categories_without_gt
            ),
        )?;
    }
    Ok(())
}

pub fn cmd_stats(args: &StatsArgs, cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<()> {
    let dataset = ingest::load_dataset(&args.gt)?;
    let boxes = ingest::sample_boxes(&dataset, cfg.stats.sample_n, cfg.seed);
    let hist = ingest::size_histogram(&boxes, cfg.stats.bin_width)?;
    write_file(&args.output, hist.to_csv().as_bytes())?;

    #[derive(Serialize)]
    struct StatsSummary {
        boxes: u64,
        sampled_images: usize,
        median_sqrt_area: Option<f64>,
    }
    let summary = StatsSummary {
        boxes: hist.total,
        sampled_images: cfg.stats.sample_n.min(dataset.images.len()),
        median_sqrt_area: ingest::median_sqrt_area(&boxes).ok(),
    };
    write_file(&suffixed(&args.output, ".summary.json"), json(&summary)?.as_bytes())?;
    Sidecar {
        command: "stats",
        seed: cfg.seed,
        threads: cfg.threads,
        inputs: vec![args.gt.display().to_string()],
        settings: &cfg.stats,
    }
    .write(&args.output)?;

    say(out, format_args!("boxes = {}", hist.total))?;
    match summary.median_sqrt_area {
        Some(m) => say(out, format_args!("median_sqrt_area = {m}")),
        None => say(out, format_args!("median_sqrt_area = n/a (empty input)")),
    }
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

/// Entry point shared by the binary: parses `args`, runs, and maps the
/// outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli, &mut std::io::stdout()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}
