//! Command implementations and the end-to-end experiment pipeline.
//!
//! Every command writes its artifacts under an output directory and finishes
//! with `manifest.txt`, a sorted list of `sha256  relative/path` lines.
//! Outputs carry no timestamps, so rerunning a config reproduces every byte.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cascade::{self, CascadeParams};
use crate::confidence_analysis::{
    build_series_with, diff_stats, improvement_fraction, part_for_tag, sorted_view, stats_csv,
    ConfidenceSeries, DiffReport,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval_metrics::{evaluate, gt_classes, Aggregation, CurveMode, EvalReport};
use crate::kitti_io::{self, make_split, FrameSet, SplitRatios};
use crate::label_transform::{self, transform_set, BodyPart};
use crate::occlusion_synth::{
    load_image, occlude_frame, save_png, to_grayscale, Image, OcclusionKind, OverlaySpec,
    ResizeFilter,
};
use crate::plot;
use crate::synthetic::{self, SimulatedDetector};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Pipeline(format!("thread pool: {e}")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn collect_files(dir: &Path, root: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, root, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("walk stays under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if rel != MANIFEST_FILE {
                out.push((rel, path));
            }
        }
    }
    Ok(())
}

/// Hash every file under `out_dir` into `out_dir/manifest.txt`.
pub fn write_manifest(out_dir: &Path) -> Result<usize> {
    let mut files = Vec::new();
    collect_files(out_dir, out_dir, &mut files)?;
    files.sort();
    let mut text = String::new();
    for (rel, path) in &files {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let _ = writeln!(text, "{}  {rel}", hex::encode(Sha256::digest(&bytes)));
    }
    write_text(&out_dir.join(MANIFEST_FILE), &text)?;
    Ok(files.len())
}

/// Create `dir`, refusing a non-empty one unless `force` (which clears it).
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty {
            if !force {
                return Err(Error::Pipeline(format!(
                    "output directory {} is not empty (use --force)",
                    dir.display()
                )));
            }
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Built-in texture when `path` is `None`.
pub fn load_texture(path: Option<&Path>, kind: OcclusionKind) -> Result<Image> {
    match path {
        Some(p) => load_image(p),
        None => Ok(match kind {
            OcclusionKind::Box => synthetic::box_texture(),
            OcclusionKind::Wall => synthetic::wall_texture(),
        }),
    }
}

/// Images keyed by frame id.
pub type ImageSet = BTreeMap<String, Image>;

/// Load `<id>.png` for every label frame. Frames without an image, and images
/// without labels, are reported as warnings.
pub fn load_images(dir: &Path, labels: &FrameSet) -> Result<(ImageSet, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut on_disk: Vec<String> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "png") {
            if let Some(stem) = path.file_stem() {
                on_disk.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    on_disk.sort();
    for id in on_disk.iter().filter(|id| !labels.contains_key(*id)) {
        warnings.push(format!("frame {id}: image has no label file"));
    }
    let ids: Vec<&String> = labels.keys().collect();
    let loaded: Vec<(String, Option<Result<Image>>)> = ids
        .par_iter()
        .map(|id| {
            let path = dir.join(format!("{id}.png"));
            let img = path.exists().then(|| load_image(&path));
            ((*id).clone(), img)
        })
        .collect();
    let mut images = ImageSet::new();
    for (id, img) in loaded {
        match img {
            Some(img) => {
                images.insert(id, img?);
            }
            None => warnings.push(format!("frame {id}: label file has no image")),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((images, warnings))
}

pub fn write_images(images: &ImageSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    images
        .par_iter()
        .map(|(id, img)| save_png(img, &dir.join(format!("{id}.png"))))
        .collect::<Result<Vec<()>>>()?;
    Ok(())
}

/// Occlude (when `spec` is set) and then optionally gray every image.
pub fn transform_images(
    images: &ImageSet,
    labels: &FrameSet,
    spec: Option<&OverlaySpec>,
    gray: bool,
) -> (ImageSet, Vec<String>) {
    let results: Vec<(String, Image, Vec<String>)> = images
        .par_iter()
        .map(|(id, img)| {
            let mut warnings = Vec::new();
            let mut out = match (spec, labels.get(id)) {
                (Some(spec), Some(frame)) => {
                    let res = occlude_frame(img, frame, spec);
                    warnings.extend(
                        res.warnings
                            .into_iter()
                            .map(|w| format!("frame {id}: {}", w.message)),
                    );
                    res.image
                }
                _ => img.clone(),
            };
            if gray {
                out = to_grayscale(&out);
            }
            (id.clone(), out, warnings)
        })
        .collect();
    let mut out = ImageSet::new();
    let mut warnings = Vec::new();
    for (id, img, w) in results {
        out.insert(id, img);
        warnings.extend(w);
    }
    (out, warnings)
}

fn warnings_text(warnings: &[String]) -> String {
    warnings.iter().map(|w| format!("{w}\n")).collect()
}

// ---------------------------------------------------------------------------
// Single commands
// ---------------------------------------------------------------------------

pub struct OccludeArgs<'a> {
    pub images: &'a Path,
    pub labels: &'a Path,
    pub kind: Option<OcclusionKind>,
    pub texture: Option<&'a Path>,
    pub width_factor: f64,
    pub filter: ResizeFilter,
    pub gray: bool,
    pub target_class: &'a str,
    pub out: &'a Path,
}

/// Occlusion and/or grayscale over an image directory. Returns the warnings.
pub fn cmd_occlude(args: &OccludeArgs<'_>) -> Result<Vec<String>> {
    let labels = kitti_io::read_dir(args.labels)?;
    let spec = match args.kind {
        Some(kind) => Some(
            OverlaySpec::new(kind, load_texture(args.texture, kind)?)?
                .with_width_factor(args.width_factor)?
                .with_filter(args.filter)
                .with_target_class(args.target_class),
        ),
        None => None,
    };
    let (images, mut warnings) = load_images(args.images, &labels)?;
    let (out_images, w) = transform_images(&images, &labels, spec.as_ref(), args.gray);
    warnings.extend(w);
    fs::create_dir_all(args.out).map_err(|e| Error::io(args.out, e))?;
    write_images(&out_images, args.out)?;
    write_text(&args.out.join("warnings.txt"), &warnings_text(&warnings))?;
    write_manifest(args.out)?;
    Ok(warnings)
}

/// Grayscale every PNG in `images` (no labels needed).
pub fn cmd_grayscale(images: &Path, out: &Path) -> Result<usize> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(images).map_err(|e| Error::io(images, e))? {
        let path = entry.map_err(|e| Error::io(images, e))?.path();
        if path.extension().is_some_and(|e| e == "png") {
            paths.push(path);
        }
    }
    paths.sort();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    paths
        .par_iter()
        .map(|p| {
            let img = to_grayscale(&load_image(p)?);
            save_png(&img, &out.join(p.file_name().expect("file has a name")))
        })
        .collect::<Result<Vec<()>>>()?;
    write_manifest(out)?;
    Ok(paths.len())
}

/// Run the simulated detector for one body part over a dataset directory.
/// `out` holds only frame files, so no manifest is written there.
pub fn cmd_simulate(
    images: &Path,
    labels: &Path,
    part: BodyPart,
    seed: u64,
    out: &Path,
) -> Result<usize> {
    let labels = kitti_io::read_dir(labels)?;
    let (imgs, _) = load_images(images, &labels)?;
    let dets = synthetic::simulate_set(&SimulatedDetector::new(part, seed), &imgs, &labels)?;
    kitti_io::write_dir(&dets, out)?;
    Ok(dets.len())
}

/// Write the synthetic dataset (`images/`, `labels/`) and the built-in textures.
pub fn cmd_synth(out: &Path, frames: usize, seed: u64) -> Result<()> {
    let ds = synthetic::synthetic_dataset(frames, seed);
    let mut labels = FrameSet::new();
    let mut images = ImageSet::new();
    for f in ds {
        images.insert(f.labels.frame_id.clone(), f.image);
        labels.insert(f.labels.frame_id.clone(), f.labels);
    }
    kitti_io::write_dir(&labels, &out.join("labels"))?;
    write_images(&images, &out.join("images"))?;
    let textures = out.join("textures");
    fs::create_dir_all(&textures).map_err(|e| Error::io(&textures, e))?;
    save_png(&synthetic::box_texture(), &textures.join("box.png"))?;
    save_png(&synthetic::wall_texture(), &textures.join("wall.png"))?;
    Ok(())
}

pub fn cmd_split(
    labels: &Path,
    ratios: SplitRatios,
    seed: u64,
    class_only: Option<&str>,
    out: &Path,
) -> Result<kitti_io::SplitManifest> {
    let frames = kitti_io::read_dir(labels)?;
    let ids: Vec<String> = match class_only {
        Some(c) => kitti_io::class_only_frames(&frames, c)
            .into_iter()
            .collect(),
        None => frames.keys().cloned().collect(),
    };
    let mut manifest = make_split(&ids, ratios, seed)?;
    if let Some(c) = class_only {
        manifest.flag_class_only(&frames, c);
    }
    write_text(out, &manifest.to_text())?;
    Ok(manifest)
}

pub fn cmd_eval(
    dets: &Path,
    gt: &Path,
    classes: &[String],
    iou_threshold: f64,
    mode: CurveMode,
    iou_grid: &[f64],
    out: &Path,
) -> Result<EvalReport> {
    let detset = kitti_io::read_dir(dets)?;
    let gtset = kitti_io::read_dir(gt)?;
    let classes = if classes.is_empty() {
        gt_classes(&gtset)
    } else {
        classes.to_vec()
    };
    let report = evaluate(&detset, &gtset, &classes, iou_threshold, mode, iou_grid)?;
    write_text(&out.join("eval.csv"), &report.to_csv())?;
    write_manifest(out)?;
    Ok(report)
}

/// Confidence table for `(tag, detection dir)` pairs; `upper`/`lower` tags are
/// matched against halved ground truth.
pub fn cmd_confidence(
    dets: &[(String, PathBuf)],
    gt: &Path,
    class_name: &str,
    iou_threshold: f64,
    aggregation: Aggregation,
    out: &Path,
) -> Result<ConfidenceSeries> {
    let gtset = kitti_io::read_dir(gt)?;
    let sets: Vec<(String, FrameSet)> = dets
        .iter()
        .map(|(t, p)| Ok((t.clone(), kitti_io::read_dir(p)?)))
        .collect::<Result<_>>()?;
    let halves = Halves::new(&gtset, class_name);
    let refs: Vec<(String, &FrameSet)> = sets.iter().map(|(t, s)| (t.clone(), s)).collect();
    let series = build_series_with(
        &refs,
        |t| halves.for_tag(t),
        &gtset,
        class_name,
        iou_threshold,
        aggregation,
    )?;
    write_series_artifacts(&series, out, "series", "Inherent confidence per frame")?;
    write_manifest(out)?;
    Ok(series)
}

/// Compare a variant detection set against a baseline on the same ground truth.
pub fn cmd_compare(
    baseline: &Path,
    variant: &Path,
    gt: &Path,
    class_name: &str,
    iou_threshold: f64,
    lost_threshold: f64,
    out: &Path,
) -> Result<DiffReport> {
    let gtset = kitti_io::read_dir(gt)?;
    let b = kitti_io::read_dir(baseline)?;
    let v = kitti_io::read_dir(variant)?;
    let refs = vec![("baseline".to_string(), &b), ("variant".to_string(), &v)];
    let series = build_series_with(
        &refs,
        |_| &gtset,
        &gtset,
        class_name,
        iou_threshold,
        Aggregation::Max,
    )?;
    let report = diff_stats(&series, "baseline", "variant", lost_threshold)?;
    write_text(
        &out.join("stats.csv"),
        &stats_csv(std::slice::from_ref(&report)),
    )?;
    write_diff_artifacts(
        &series,
        "baseline",
        "variant",
        out,
        "diff",
        "Confidence decrease, baseline - variant",
    )?;
    write_manifest(out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSummary {
    pub frames: usize,
    pub hypotheses: usize,
    pub gated: usize,
    pub eval: Option<EvalReport>,
}

fn class_dets(set: &FrameSet, id: &str, class_name: &str) -> Vec<kitti_io::Detection> {
    set.get(id)
        .map(|f| {
            f.detections()
                .into_iter()
                .filter(|d| d.class_name() == class_name)
                .collect()
        })
        .unwrap_or_default()
}

/// Fuse three detection sets frame by frame; returns the fused set and sidecar CSV.
pub fn run_cascade(
    full: &FrameSet,
    upper: &FrameSet,
    lower: &FrameSet,
    params: &CascadeParams,
    class_name: &str,
) -> (FrameSet, String, usize) {
    let ids: std::collections::BTreeSet<&String> = full
        .keys()
        .chain(upper.keys())
        .chain(lower.keys())
        .collect();
    let mut fused = FrameSet::new();
    let mut sidecar = format!("{}\n", cascade::SIDECAR_HEADER);
    let mut gated = 0;
    for id in ids {
        let hyps = cascade::cascade_decide(
            &class_dets(full, id, class_name),
            &class_dets(upper, id, class_name),
            &class_dets(lower, id, class_name),
            params,
        );
        gated += hyps.iter().filter(|h| h.gated).count();
        sidecar.push_str(&cascade::sidecar_rows(id, &hyps));
        fused.insert(id.clone(), cascade::to_frame(id, &hyps, class_name));
    }
    (fused, sidecar, gated)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_cascade(
    full: &Path,
    upper: &Path,
    lower: &Path,
    params: &CascadeParams,
    class_name: &str,
    gt: Option<&Path>,
    iou_threshold: f64,
    out: &Path,
) -> Result<CascadeSummary> {
    params.validate()?;
    let (f, u, l) = (
        kitti_io::read_dir(full)?,
        kitti_io::read_dir(upper)?,
        kitti_io::read_dir(lower)?,
    );
    let (fused, sidecar, gated) = run_cascade(&f, &u, &l, params, class_name);
    kitti_io::write_dir(&fused, &out.join("detections"))?;
    write_text(&out.join("hypotheses.csv"), &sidecar)?;
    write_text(&out.join("params.txt"), &params.to_text())?;
    let eval = match gt {
        Some(gt) => {
            let gtset = kitti_io::read_dir(gt)?;
            let report = evaluate(
                &fused,
                &gtset,
                &[class_name.to_string()],
                iou_threshold,
                CurveMode::ConfidenceSweep,
                &[],
            )?;
            write_text(&out.join("eval.csv"), &report.to_csv())?;
            Some(report)
        }
        None => None,
    };
    write_manifest(out)?;
    Ok(CascadeSummary {
        frames: fused.len(),
        hypotheses: fused.values().map(|f| f.objects.len()).sum(),
        gated,
        eval,
    })
}

/// Ground truth per model tag: full boxes, or their upper/lower halves.
struct Halves<'a> {
    full: &'a FrameSet,
    upper: FrameSet,
    lower: FrameSet,
}

impl<'a> Halves<'a> {
    fn new(full: &'a FrameSet, class_name: &str) -> Self {
        Self {
            full,
            upper: transform_set(full, BodyPart::Upper, class_name),
            lower: transform_set(full, BodyPart::Lower, class_name),
        }
    }

    fn from_parts(full: &'a FrameSet, upper: FrameSet, lower: FrameSet) -> Self {
        Self { full, upper, lower }
    }

    fn for_tag(&self, tag: &str) -> &FrameSet {
        self.part(part_for_tag(tag))
    }

    fn part(&self, part: BodyPart) -> &FrameSet {
        match part {
            BodyPart::Full => self.full,
            BodyPart::Upper => &self.upper,
            BodyPart::Lower => &self.lower,
        }
    }
}

fn reference_tag(series: &ConfidenceSeries) -> Result<String> {
    series
        .tags()
        .find(|t| *t == "full")
        .or_else(|| series.tags().next())
        .map(str::to_string)
        .ok_or_else(|| Error::Pipeline("confidence series has no columns".into()))
}

/// `<stem>.csv`, `<stem>_means.csv` and `<stem>.svg` (sorted by the `full` column).
fn write_series_artifacts(
    series: &ConfidenceSeries,
    out: &Path,
    stem: &str,
    title: &str,
) -> Result<()> {
    let csv = series.to_csv();
    write_text(&out.join(format!("{stem}.csv")), &csv)?;
    let mut means = String::from("tag,mean_confidence,num_frames\n");
    for tag in series.tags() {
        let mean = series.mean(tag).map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(means, "{tag},{mean},{}", series.len());
    }
    write_text(&out.join(format!("{stem}_means.csv")), &means)?;
    let svg = plot::confidence_plot(&csv, &reference_tag(series)?, title)?;
    write_text(&out.join(format!("{stem}.svg")), &svg)
}

/// Per-frame decreases ordered by the variant's own confidence, and their plot.
fn write_diff_artifacts(
    series: &ConfidenceSeries,
    baseline: &str,
    variant: &str,
    out: &Path,
    stem: &str,
    title: &str,
) -> Result<()> {
    let (_, sorted) = sorted_view(series, variant, true)?;
    let csv = plot::difference_csv(&sorted.frames, sorted.get(baseline)?, sorted.get(variant)?);
    write_text(&out.join(format!("{stem}.csv")), &csv)?;
    write_text(
        &out.join(format!("{stem}.svg")),
        &plot::difference_plot(&csv, title)?,
    )
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Original,
    Box,
    Wall,
    Gray,
    GrayBox,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Original,
        Variant::Box,
        Variant::Wall,
        Variant::Gray,
        Variant::GrayBox,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Box => "box",
            Variant::Wall => "wall",
            Variant::Gray => "gray",
            Variant::GrayBox => "gray_box",
        }
    }

    fn occlusion(&self) -> Option<OcclusionKind> {
        match self {
            Variant::Box | Variant::GrayBox => Some(OcclusionKind::Box),
            Variant::Wall => Some(OcclusionKind::Wall),
            Variant::Original | Variant::Gray => None,
        }
    }

    fn gray(&self) -> bool {
        matches!(self, Variant::Gray | Variant::GrayBox)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub model: String,
    pub map: Option<f64>,
    pub mean_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub rows: Vec<SummaryRow>,
    pub comparisons: Vec<DiffReport>,
    pub warnings: Vec<String>,
    pub artifacts: usize,
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("variant,model,map,mean_confidence\n");
    for r in rows {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.variant,
            r.model,
            opt(r.map),
            opt(r.mean_confidence)
        );
    }
    out
}

const MODELS: [BodyPart; 3] = [BodyPart::Full, BodyPart::Upper, BodyPart::Lower];

/// Split → derived labels → image variants → detections → eval → confidence
/// → compare → cascade → summary and manifest.
pub fn run_pipeline(config: &PipelineConfig, force: bool) -> Result<PipelineSummary> {
    config.validate()?;
    let out = &config.out;
    prepare_out_dir(out, force)?;
    let class = config.target_class.as_str();
    let mut warnings = Vec::new();

    write_text(&out.join("config.txt"), &config.to_text())?;

    // dataset split
    let labels_dir = config.labels_dir();
    let gt = kitti_io::read_dir(&labels_dir)?;
    if gt.is_empty() {
        return Err(Error::Pipeline(format!(
            "no label files in {}",
            labels_dir.display()
        )));
    }
    let ids: Vec<String> = gt.keys().cloned().collect();
    let mut manifest = make_split(&ids, config.split_ratios, config.seed)?;
    manifest.flag_class_only(&gt, class);
    write_text(&out.join("split.tsv"), &manifest.to_text())?;

    // half-body label variants
    let mut derived = BTreeMap::new();
    for part in [BodyPart::Upper, BodyPart::Lower] {
        let dir = out.join("labels").join(part.as_str());
        let rep = label_transform::materialize(&labels_dir, &dir, part, class, false)?;
        warnings.extend(rep.warnings);
        derived.insert(part, kitti_io::read_dir(&dir)?);
    }
    let halves = Halves::from_parts(
        &gt,
        derived
            .remove(&BodyPart::Upper)
            .expect("upper labels written"),
        derived
            .remove(&BodyPart::Lower)
            .expect("lower labels written"),
    );

    // image variants
    let (original, w) = load_images(&config.images_dir(), &gt)?;
    warnings.extend(w);
    let textures = [
        (
            OcclusionKind::Box,
            load_texture(config.box_texture.as_deref(), OcclusionKind::Box)?,
            config.box_width_factor,
        ),
        (
            OcclusionKind::Wall,
            load_texture(config.wall_texture.as_deref(), OcclusionKind::Wall)?,
            config.wall_width_factor,
        ),
    ];
    let specs: BTreeMap<_, _> = textures
        .into_iter()
        .map(|(kind, tex, wf)| {
            let spec = OverlaySpec::new(kind, tex)?
                .with_width_factor(wf)?
                .with_filter(config.resize_filter)
                .with_target_class(class);
            Ok((kind.as_str(), spec))
        })
        .collect::<Result<_>>()?;
    let mut variant_images: BTreeMap<Variant, ImageSet> = BTreeMap::new();
    for variant in Variant::ALL {
        let images = if variant == Variant::Original {
            original.clone()
        } else {
            let spec = variant.occlusion().map(|k| &specs[k.as_str()]);
            let (imgs, w) = transform_images(&original, &gt, spec, variant.gray());
            warnings.extend(w);
            write_images(&imgs, &out.join("images").join(variant.as_str()))?;
            imgs
        };
        variant_images.insert(variant, images);
    }

    // detections per variant and model
    let mut detections: BTreeMap<(Variant, BodyPart), FrameSet> = BTreeMap::new();
    for variant in Variant::ALL {
        for part in MODELS {
            let dets = match config.detections_dir() {
                Some(root) => {
                    let dir = root.join(variant.as_str()).join(part.as_str());
                    kitti_io::read_dir(&dir)?
                }
                None => {
                    let det = SimulatedDetector::new(part, config.seed);
                    let set = synthetic::simulate_set(&det, &variant_images[&variant], &gt)?;
                    kitti_io::write_dir(
                        &set,
                        &out.join("detections")
                            .join(variant.as_str())
                            .join(part.as_str()),
                    )?;
                    set
                }
            };
            detections.insert((variant, part), dets);
        }
    }

    // evaluation
    let mut rows = Vec::new();
    for variant in Variant::ALL {
        for part in MODELS {
            let report = evaluate(
                &detections[&(variant, part)],
                halves.part(part),
                &[class.to_string()],
                config.iou_threshold,
                config.ap_mode,
                &config.iou_grid,
            )?;
            write_text(
                &out.join("eval").join(format!("{variant}_{part}.csv")),
                &report.to_csv(),
            )?;
            rows.push(SummaryRow {
                variant: variant.to_string(),
                model: part.to_string(),
                map: report.map,
                mean_confidence: None,
            });
        }
    }

    // confidence tables and comparisons against the unmodified full-body model
    let baseline = &detections[&(Variant::Original, BodyPart::Full)];
    let mut comparisons = Vec::new();
    let mut improvement = String::from("variant,lower_over_full,upper_over_full\n");
    for variant in Variant::ALL {
        let mut sets: Vec<(String, &FrameSet)> = vec![("baseline".to_string(), baseline)];
        for part in MODELS {
            sets.push((part.to_string(), &detections[&(variant, part)]));
        }
        let series = build_series_with(
            &sets,
            |t| halves.for_tag(t),
            &gt,
            class,
            config.iou_threshold,
            Aggregation::Max,
        )?;
        let dir = out.join("confidence");
        write_series_artifacts(
            &series,
            &dir,
            variant.as_str(),
            &format!("Inherent confidence, {variant} images"),
        )?;
        for row in rows.iter_mut().filter(|r| r.variant == variant.as_str()) {
            row.mean_confidence = series.mean(&row.model).ok();
        }
        if series.is_empty() {
            continue;
        }
        let _ = writeln!(
            improvement,
            "{variant},{},{}",
            improvement_fraction(&series, "lower", "full")?,
            improvement_fraction(&series, "upper", "full")?
        );
        if variant != Variant::Original {
            let report = diff_stats(&series, "baseline", "full", config.lost_threshold)?;
            let report = DiffReport {
                baseline_tag: "original_full".into(),
                variant_tag: format!("{variant}_full"),
                ..report
            };
            write_diff_artifacts(
                &series,
                "baseline",
                "full",
                &out.join("compare"),
                &format!("{variant}_diff"),
                &format!("Full-body confidence decrease, original - {variant}"),
            )?;
            comparisons.push(report);
        }
    }
    write_text(
        &out.join("compare").join("stats.csv"),
        &stats_csv(&comparisons),
    )?;
    write_text(&out.join("compare").join("improvement.csv"), &improvement)?;

    // cascade
    for variant in Variant::ALL {
        let (fused, sidecar, _) = run_cascade(
            &detections[&(variant, BodyPart::Full)],
            &detections[&(variant, BodyPart::Upper)],
            &detections[&(variant, BodyPart::Lower)],
            &config.cascade,
            class,
        );
        let dir = out.join("cascade").join(variant.as_str());
        kitti_io::write_dir(&fused, &dir.join("detections"))?;
        write_text(&dir.join("hypotheses.csv"), &sidecar)?;
        let report = evaluate(
            &fused,
            &gt,
            &[class.to_string()],
            config.iou_threshold,
            config.ap_mode,
            &config.iou_grid,
        )?;
        write_text(
            &out.join("eval").join(format!("{variant}_cascade.csv")),
            &report.to_csv(),
        )?;
        let series = build_series_with(
            &[("cascade".to_string(), &fused)],
            |_| &gt,
            &gt,
            class,
            config.iou_threshold,
            Aggregation::Max,
        )?;
        rows.push(SummaryRow {
            variant: variant.to_string(),
            model: "cascade".into(),
            map: report.map,
            mean_confidence: series.mean("cascade").ok(),
        });
    }

    write_text(&out.join("summary.csv"), &summary_csv(&rows))?;
    write_text(&out.join("warnings.txt"), &warnings_text(&warnings))?;
    let artifacts = write_manifest(out)?;
    Ok(PipelineSummary {
        rows,
        comparisons,
        warnings,
        artifacts,
    })
}
