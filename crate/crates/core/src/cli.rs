//! Command-line entry point: remap, fuse, evaluate, plan-epoch,
//! lr-schedule, tta-merge, upsample and inspect subcommands.
//!
//! Exit codes: 0 success, 1 input/validation error, 2 internal invariant
//! violation. Output files are written atomically; progress and warnings go
//! to stderr, machine-readable results to files or stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_plan::{plan_epoch, LrSchedule};
use crate::fs_util::atomic_write;
use crate::fusion::{panoptic_fuse, FusionConfig, InstancePrediction};
use crate::label_space::{
    build_joint_space, remap_panoptic, DatasetSchema, JointLabelSpace, MergeRule,
};
use crate::metrics::{finalize, match_segments, GroupReport, PqReport, PqStats};
use crate::raster::{read_panoptic, write_panoptic, PanopticMap};
use crate::tensor::{read_logits, read_tensor, write_logits, TensorData};
use crate::tta::{merge_predictions, upsample_panoptic, PredictionVariant};

/// Environment variable overriding the `--workers` flag.
pub const WORKERS_ENV: &str = "PANOPTIC_FORGE_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "panoptic-forge",
    version,
    about = "Panoptic segmentation post-processing and evaluation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rewrite per-dataset class ids into a unified label space
    Remap(RemapArgs),
    /// Fuse semantic logits with instance predictions into a panoptic map
    Fuse(FuseArgs),
    /// Compute PQ/SQ/RQ between prediction and ground-truth directories
    Evaluate(EvaluateArgs),
    /// Compose a balanced training epoch by dataset replication
    PlanEpoch(PlanEpochArgs),
    /// Print the learning rate at given iterations
    LrSchedule(LrScheduleArgs),
    /// Merge scaled/flipped semantic predictions
    TtaMerge(TtaMergeArgs),
    /// Upsample a panoptic prediction to the original image size
    Upsample(UpsampleArgs),
    /// Print a summary of a tensor, panoptic map or space file
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct RemapArgs {
    /// Directory of per-dataset schema JSON files
    #[arg(long = "schema-dir")]
    schema_dir: PathBuf,
    /// Merge-rule JSON document (omit for a plain disjoint union)
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Dataset id of the maps under --in
    #[arg(long)]
    dataset: String,
    /// Directory of input PNG+JSON map pairs
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory for the remapped maps
    #[arg(long)]
    out: PathBuf,
    /// Also write the built joint space to this path
    #[arg(long = "space-out")]
    space_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FuseArgs {
    /// Semantic logits tensor (`.ptns` with channel sidecar)
    #[arg(long)]
    sem: PathBuf,
    /// Instance prediction JSON document
    #[arg(long)]
    instances: PathBuf,
    /// Fusion config JSON (confidence/overlap thresholds, min_sa)
    #[arg(long)]
    config: PathBuf,
    /// Joint label space JSON
    #[arg(long)]
    space: PathBuf,
    /// Output PNG path; the JSON record lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Ground-truth directory (PNG+JSON pairs)
    #[arg(long)]
    gt: PathBuf,
    /// Prediction directory (PNG+JSON pairs)
    #[arg(long)]
    pred: PathBuf,
    /// Joint label space JSON
    #[arg(long)]
    space: PathBuf,
    /// Report output path
    #[arg(long)]
    report: PathBuf,
    /// Worker threads (default: all cores; PANOPTIC_FORGE_WORKERS overrides)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct PlanEpochArgs {
    /// Dataset stats JSON (list of {name, train_size})
    #[arg(long)]
    stats: PathBuf,
    /// Dataset appearing once per epoch
    #[arg(long)]
    anchor: String,
    /// Replication factor for the non-anchor datasets
    #[arg(long, default_value_t = 3)]
    factor: u32,
    #[arg(long)]
    seed: u64,
    /// Plan output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LrScheduleArgs {
    /// Iterations to evaluate, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    iters: Vec<u64>,
    /// Schedule JSON (defaults to the published schedule)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TtaMergeArgs {
    /// Variants as `path:scale:none|flip`
    #[arg(long, num_args = 1.., required = true)]
    variants: Vec<String>,
    /// Canonical output size as WxH
    #[arg(long)]
    target: String,
    /// Merged logits output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct UpsampleArgs {
    /// Input panoptic PNG (JSON record expected next to it)
    #[arg(long = "in")]
    input: PathBuf,
    /// Target size as WxH
    #[arg(long)]
    target: String,
    /// Output PNG path; the JSON record lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// `.ptns` tensor, panoptic `.png` or toolkit `.json` file
    file: PathBuf,
}

/// Run the CLI on the given argv and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match std::panic::catch_unwind(|| dispatch(cli.command)) {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            1
        }
        Err(_) => {
            eprintln!("error: internal invariant violation");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Remap(args) => cmd_remap(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::PlanEpoch(args) => cmd_plan_epoch(args),
        Command::LrSchedule(args) => cmd_lr_schedule(args),
        Command::TtaMerge(args) => cmd_tta_merge(args),
        Command::Upsample(args) => cmd_upsample(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn json_sibling(png_path: &Path) -> PathBuf {
    png_path.with_extension("json")
}

/// Outputs are validated before any work starts.
fn ensure_writable_parent(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            bail!("output directory {} does not exist", dir.display());
        }
    }
    Ok(())
}

fn parse_size(text: &str) -> Result<(u32, u32)> {
    let (w, h) = text
        .split_once(['x', 'X'])
        .with_context(|| format!("size {text:?} is not WxH"))?;
    Ok((
        w.trim()
            .parse()
            .with_context(|| format!("bad width in {text:?}"))?,
        h.trim()
            .parse()
            .with_context(|| format!("bad height in {text:?}"))?,
    ))
}

/// Sorted basenames of the `.png` files in a directory.
fn png_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

fn cmd_remap(args: RemapArgs) -> Result<()> {
    let mut schemas: Vec<DatasetSchema> = Vec::new();
    let mut schema_files: Vec<PathBuf> = std::fs::read_dir(&args.schema_dir)
        .with_context(|| format!("listing {}", args.schema_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    schema_files.sort();
    if schema_files.is_empty() {
        bail!("no schema files in {}", args.schema_dir.display());
    }
    for path in &schema_files {
        schemas.push(read_json(path)?);
    }
    let rules: Vec<MergeRule> = match &args.rules {
        Some(path) => read_json(path)?,
        None => Vec::new(),
    };
    let space = build_joint_space(&schemas, &rules)?;
    eprintln!(
        "joint space: {} classes ({} thing, {} stuff)",
        space.num_classes(),
        space.category_counts().0,
        space.category_counts().1
    );
    if let Some(space_out) = &args.space_out {
        atomic_write(space_out, space.to_json().as_bytes())
            .with_context(|| format!("writing {}", space_out.display()))?;
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let stems = png_stems(&args.input)?;
    for stem in &stems {
        let png_in = args.input.join(format!("{stem}.png"));
        let json_in = args.input.join(format!("{stem}.json"));
        let map = read_panoptic(&png_in, &json_in)
            .with_context(|| format!("reading {}", png_in.display()))?;
        let remapped = remap_panoptic(&map, &args.dataset, &space)?;
        write_panoptic(
            &remapped,
            &args.out.join(format!("{stem}.png")),
            &args.out.join(format!("{stem}.json")),
        )?;
    }
    eprintln!("remapped {} maps into {}", stems.len(), args.out.display());
    Ok(())
}

/// Instance document accompanying `fuse`: each record names its mask tensor
/// (rank-2 f32 `.ptns`, bbox-resolution or full canvas) by path relative to
/// the document.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    instances: Vec<InstanceRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    class_id: u32,
    confidence: f64,
    /// x0, y0, x1, y1 with exclusive upper bounds
    bbox: [u32; 4],
    mask: String,
}

fn load_instances(path: &Path) -> Result<Vec<InstancePrediction>> {
    let doc: InstanceDoc = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::with_capacity(doc.instances.len());
    for (i, record) in doc.instances.into_iter().enumerate() {
        let mask_path = base.join(&record.mask);
        let tensor = read_tensor(&mask_path)
            .with_context(|| format!("instance {i}: reading {}", mask_path.display()))?;
        if tensor.dims.len() != 2 {
            bail!(
                "instance {i}: mask tensor must be rank 2, found rank {}",
                tensor.dims.len()
            );
        }
        let values = match tensor.data {
            TensorData::F32(v) => v,
            other => bail!(
                "instance {i}: mask tensor must be f32, found {}",
                other.dtype_name()
            ),
        };
        out.push(InstancePrediction {
            class_id: record.class_id,
            confidence: record.confidence,
            bbox: (
                record.bbox[0],
                record.bbox[1],
                record.bbox[2],
                record.bbox[3],
            ),
            mask_height: tensor.dims[0],
            mask_width: tensor.dims[1],
            mask_logits: values,
        });
    }
    Ok(out)
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    ensure_writable_parent(&args.out)?;
    let sem = read_logits(&args.sem)?;
    let instances = load_instances(&args.instances)?;
    let config: FusionConfig = read_json(&args.config)?;
    let space = JointLabelSpace::from_json(
        &std::fs::read_to_string(&args.space)
            .with_context(|| format!("reading {}", args.space.display()))?,
    )?;
    let map = panoptic_fuse(&sem, &instances, &config, &space)?;
    write_panoptic(&map, &args.out, &json_sibling(&args.out))?;
    eprintln!(
        "fused {} instances into {} segments ({} void pixels)",
        instances.len(),
        map.segments().len(),
        map.void_area()
    );
    Ok(())
}

fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(text) => text
            .parse::<usize>()
            .with_context(|| format!("{WORKERS_ENV}={text:?} is not a worker count"))?,
        Err(_) => flag.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        }),
    };
    if workers == 0 {
        bail!("worker count must be at least 1");
    }
    Ok(workers)
}

/// Evaluate matching PNG+JSON pairs of two directories.
///
/// Ground-truth files must be readable; a missing prediction logs a warning
/// and counts every ground-truth segment of that image as FN. Per-image
/// stats are computed in parallel and reduced in filename order, so the
/// result does not depend on the worker count.
pub fn evaluate_dir(
    pred_dir: &Path,
    gt_dir: &Path,
    space: &JointLabelSpace,
    workers: usize,
) -> Result<PqReport> {
    let (_, report) = evaluate_dir_stats(pred_dir, gt_dir, space, workers)?;
    Ok(report)
}

/// [`evaluate_dir`] variant also returning the raw accumulators.
pub fn evaluate_dir_stats(
    pred_dir: &Path,
    gt_dir: &Path,
    space: &JointLabelSpace,
    workers: usize,
) -> Result<(PqStats, PqReport)> {
    let stems = png_stems(gt_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;

    let per_image: Vec<Result<(PqStats, bool)>> = pool.install(|| {
        stems
            .par_iter()
            .map(|stem| evaluate_one(pred_dir, gt_dir, stem))
            .collect()
    });

    // Filename-ordered reduction keeps the result worker-count-invariant.
    let mut stats = PqStats::new();
    let mut missing = 0usize;
    for (stem, result) in stems.iter().zip(per_image) {
        let (image_stats, pred_present) = result.with_context(|| format!("evaluating {stem}"))?;
        if !pred_present {
            eprintln!("warning: no prediction for {stem}; counting its ground truth as FN");
            missing += 1;
        }
        stats.merge(&image_stats);
    }
    if missing > 0 {
        eprintln!(
            "warning: {missing} of {} images had no prediction",
            stems.len()
        );
    }
    let report = finalize(&stats, space)?;
    Ok((stats, report))
}

fn evaluate_one(pred_dir: &Path, gt_dir: &Path, stem: &str) -> Result<(PqStats, bool)> {
    let gt_png = gt_dir.join(format!("{stem}.png"));
    let gt_json = gt_dir.join(format!("{stem}.json"));
    let gt = read_panoptic(&gt_png, &gt_json)
        .with_context(|| format!("reading ground truth {}", gt_png.display()))?;

    let pred_png = pred_dir.join(format!("{stem}.png"));
    let pred_json = pred_dir.join(format!("{stem}.json"));
    let pred_present = pred_png.exists() && pred_json.exists();
    let pred = if pred_present {
        read_panoptic(&pred_png, &pred_json)
            .with_context(|| format!("reading prediction {}", pred_png.display()))?
    } else {
        PanopticMap::all_void(gt.width(), gt.height())?
    };
    Ok((match_segments(&pred, &gt)?, pred_present))
}

fn percent(v: f64) -> f64 {
    (v * 1000.0).round() / 10.0
}

#[derive(Debug, Serialize)]
struct GroupDoc {
    pq: f64,
    sq: f64,
    rq: f64,
    classes: usize,
}

impl From<&GroupReport> for GroupDoc {
    fn from(g: &GroupReport) -> Self {
        GroupDoc {
            pq: percent(g.pq),
            sq: percent(g.sq),
            rq: percent(g.rq),
            classes: g.classes,
        }
    }
}

#[derive(Debug, Serialize)]
struct ClassDoc {
    class_id: u32,
    name: String,
    category: String,
    pq: f64,
    sq: f64,
    rq: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_count: u64,
}

#[derive(Debug, Serialize)]
struct ReportDoc {
    num_images: usize,
    all: GroupDoc,
    things: GroupDoc,
    stuff: GroupDoc,
    per_class: Vec<ClassDoc>,
}

fn report_doc(report: &PqReport, space: &JointLabelSpace, num_images: usize) -> ReportDoc {
    let per_class = report
        .per_class
        .iter()
        .map(|(&class_id, c)| {
            let entry = space.entry(class_id);
            ClassDoc {
                class_id,
                name: entry.map(|e| e.name.clone()).unwrap_or_default(),
                category: entry.map(|e| e.category.to_string()).unwrap_or_default(),
                pq: percent(c.pq),
                sq: percent(c.sq),
                rq: percent(c.rq),
                tp: c.tp,
                fp: c.fp,
                fn_count: c.fn_count,
            }
        })
        .collect();
    ReportDoc {
        num_images,
        all: GroupDoc::from(&report.all),
        things: GroupDoc::from(&report.things),
        stuff: GroupDoc::from(&report.stuff),
        per_class,
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    ensure_writable_parent(&args.report)?;
    let space = JointLabelSpace::from_json(
        &std::fs::read_to_string(&args.space)
            .with_context(|| format!("reading {}", args.space.display()))?,
    )?;
    let workers = resolve_workers(args.workers)?;
    let stems = png_stems(&args.gt)?;
    let report = evaluate_dir(&args.pred, &args.gt, &space, workers)?;
    let doc = report_doc(&report, &space, stems.len());
    write_json_atomic(&args.report, &doc)?;
    eprintln!(
        "evaluated {} images with {} workers: PQ {:.1} SQ {:.1} RQ {:.1} over {} classes",
        stems.len(),
        workers,
        doc.all.pq,
        doc.all.sq,
        doc.all.rq,
        doc.all.classes
    );
    Ok(())
}

fn cmd_plan_epoch(args: PlanEpochArgs) -> Result<()> {
    ensure_writable_parent(&args.out)?;
    let stats: Vec<crate::data_plan::DatasetStats> = read_json(&args.stats)?;
    let plan = plan_epoch(&stats, &args.anchor, args.factor, args.seed)?;
    eprintln!(
        "epoch of {} samples (anchor {})",
        plan.items.len(),
        args.anchor
    );
    write_json_atomic(&args.out, &plan)
}

fn cmd_lr_schedule(args: LrScheduleArgs) -> Result<()> {
    let schedule: LrSchedule = match &args.config {
        Some(path) => read_json(path)?,
        None => LrSchedule::default(),
    };
    schedule.validate()?;
    println!("iter\tlr");
    for &iter in &args.iters {
        println!("{iter}\t{}", schedule.lr_at(iter));
    }
    Ok(())
}

fn parse_variant_spec(spec: &str) -> Result<(PathBuf, f64, bool)> {
    let mut parts = spec.rsplitn(3, ':');
    let flip_text = parts.next().context("variant spec is empty")?;
    let scale_text = parts
        .next()
        .with_context(|| format!("variant {spec:?} is not path:scale:none|flip"))?;
    let path = parts
        .next()
        .with_context(|| format!("variant {spec:?} is not path:scale:none|flip"))?;
    let flipped = match flip_text {
        "flip" => true,
        "none" => false,
        other => bail!("variant flip field must be `flip` or `none`, got {other:?}"),
    };
    let scale: f64 = scale_text
        .parse()
        .with_context(|| format!("bad scale {scale_text:?} in variant {spec:?}"))?;
    Ok((PathBuf::from(path), scale, flipped))
}

fn cmd_tta_merge(args: TtaMergeArgs) -> Result<()> {
    ensure_writable_parent(&args.out)?;
    let (target_w, target_h) = parse_size(&args.target)?;
    let mut variants = Vec::with_capacity(args.variants.len());
    for spec in &args.variants {
        let (path, scale, flipped) = parse_variant_spec(spec)?;
        let logits = read_logits(&path)?;
        variants.push(PredictionVariant {
            logits,
            scale,
            flipped,
        });
    }
    let merged = merge_predictions(&variants, target_w, target_h)?;
    write_logits(&args.out, &merged)?;
    eprintln!(
        "merged {} variants into {}x{}x{} log-probabilities",
        variants.len(),
        merged.channels(),
        target_h,
        target_w
    );
    Ok(())
}

fn cmd_upsample(args: UpsampleArgs) -> Result<()> {
    ensure_writable_parent(&args.out)?;
    let (target_w, target_h) = parse_size(&args.target)?;
    let map = read_panoptic(&args.input, &json_sibling(&args.input))?;
    let up = upsample_panoptic(&map, target_w, target_h)?;
    write_panoptic(&up, &args.out, &json_sibling(&args.out))?;
    eprintln!(
        "upsampled {}x{} -> {}x{}",
        map.width(),
        map.height(),
        target_w,
        target_h
    );
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let path = &args.file;
    match path.extension().and_then(|e| e.to_str()) {
        Some("ptns") => inspect_tensor(path),
        Some("png") => inspect_panoptic(path),
        Some("json") => inspect_json(path),
        other => bail!("cannot inspect {:?} files", other.unwrap_or("<none>")),
    }
}

fn inspect_tensor(path: &Path) -> Result<()> {
    let tensor = read_tensor(path)?;
    let dims: Vec<String> = tensor.dims.iter().map(|d| d.to_string()).collect();
    println!("tensor {}", path.display());
    println!("  dtype: {}", tensor.data.dtype_name());
    println!("  dims: {}", dims.join("x"));
    println!("  elements: {}", tensor.data.len());
    let sidecar = PathBuf::from(format!("{}.json", path.display()));
    if sidecar.exists() {
        let logits = read_logits(path)?;
        println!(
            "  channels: {} ({} stuff)",
            logits.channels(),
            logits.stuff_channels().len()
        );
    }
    Ok(())
}

fn inspect_panoptic(path: &Path) -> Result<()> {
    let map = read_panoptic(path, &json_sibling(path))?;
    println!("panoptic map {}", path.display());
    println!("  size: {}x{}", map.width(), map.height());
    println!("  segments: {}", map.segments().len());
    println!("  void pixels: {}", map.void_area());
    for segment in map.segments() {
        println!(
            "  segment {}: class {} area {}{}",
            segment.id,
            segment.class_id,
            segment.area,
            if segment.ignore { " (crowd)" } else { "" }
        );
    }
    Ok(())
}

fn inspect_json(path: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if let Ok(space) = JointLabelSpace::from_json(&text) {
        let (things, stuff) = space.category_counts();
        println!("joint label space {}", path.display());
        println!(
            "  classes: {} ({things} thing, {stuff} stuff)",
            space.num_classes()
        );
        println!(
            "  remap rows: {}",
            space
                .entries()
                .iter()
                .map(|e| e.sources.len())
                .sum::<usize>()
        );
        return Ok(());
    }
    if let Some(items) = value.get("items").and_then(|v| v.as_array()) {
        println!("epoch plan {}", path.display());
        println!("  samples: {}", items.len());
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for item in items {
            if let Some(name) = item.get("dataset").and_then(|v| v.as_str()) {
                *counts.entry(name).or_insert(0) += 1;
            }
        }
        for (name, count) in counts {
            println!("  {name}: {count}");
        }
        return Ok(());
    }
    if let Some(segments) = value.get("segments_info").and_then(|v| v.as_array()) {
        println!("panoptic record {}", path.display());
        println!("  segments: {}", segments.len());
        return Ok(());
    }
    println!("json document {}", path.display());
    if let Some(object) = value.as_object() {
        println!(
            "  keys: {}",
            object.keys().cloned().collect::<Vec<_>>().join(", ")
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_spec_parsing() {
        let (path, scale, flipped) = parse_variant_spec("v0.ptns:1.0:none").unwrap();
        assert_eq!(path, PathBuf::from("v0.ptns"));
        assert_eq!(scale, 1.0);
        assert!(!flipped);
        let (path, scale, flipped) = parse_variant_spec("dir/v1.ptns:1.5:flip").unwrap();
        assert_eq!(path, PathBuf::from("dir/v1.ptns"));
        assert_eq!(scale, 1.5);
        assert!(flipped);
        assert!(parse_variant_spec("v0.ptns").is_err());
        assert!(parse_variant_spec("v0.ptns:1.0:maybe").is_err());
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("1920x1080").unwrap(), (1920, 1080));
        assert_eq!(parse_size("4X4").unwrap(), (4, 4));
        assert!(parse_size("1920").is_err());
        assert!(parse_size("ax3").is_err());
    }

    #[test]
    fn percent_renders_one_decimal() {
        assert_eq!(percent(1.0), 100.0);
        assert_eq!(percent(0.533333), 53.3);
        assert_eq!(percent(0.0), 0.0);
        assert_eq!(percent(0.8 / 1.5), 53.3);
    }

    #[test]
    fn unknown_subcommand_exits_one() {
        assert_eq!(run(["panoptic-forge", "frobnicate"]), 1);
        assert_eq!(run(["panoptic-forge", "evaluate", "--bogus-flag"]), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["panoptic-forge", "--help"]), 0);
    }
}
