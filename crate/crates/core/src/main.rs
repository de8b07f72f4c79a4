use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use occlbench::cascade::CascadeParams;
use occlbench::config::PipelineConfig;
use occlbench::eval_metrics::{default_iou_grid, Aggregation, CurveMode};
use occlbench::kitti_io::SplitRatios;
use occlbench::label_transform::{self, BodyPart};
use occlbench::occlusion_synth::{OcclusionKind, ResizeFilter};
use occlbench::pipeline::{self, prepare_out_dir, OccludeArgs};
use occlbench::{Error, Result};

#[derive(Parser)]
#[command(
    name = "occlbench",
    version,
    about = "Occlusion-robustness benchmarking for pedestrian detectors"
)]
struct Cli {
    /// Worker threads for image and per-frame work.
    #[arg(long, global = true, env = "OCCLBENCH_JOBS", default_value_t = default_jobs())]
    jobs: usize,
    /// Replace a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic demo dataset (images, labels, textures).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Deterministic train/test/validation split of a label directory.
    Split {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "0.4,0.4,0.2")]
        ratios: SplitRatios,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only split frames that contain this class.
        #[arg(long)]
        class_only: Option<String>,
        /// Manifest file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive upper- or lower-body labels from full-body labels.
    SplitLabels {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long)]
        part: BodyPart,
        #[arg(long, default_value = "Pedestrian")]
        class: String,
    },
    /// Paste occluders over labelled objects, optionally also graying the result.
    Occlude {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `box` covers the upper body, `wall` the lower body.
        #[arg(long)]
        kind: Option<OcclusionKind>,
        /// Texture PNG; a built-in texture is used when omitted.
        #[arg(long)]
        texture: Option<PathBuf>,
        /// Occluder width relative to the box width (box 1.0, wall 1.5 by default).
        #[arg(long)]
        width_factor: Option<f64>,
        #[arg(long, default_value = "bilinear")]
        filter: ResizeFilter,
        #[arg(long)]
        gray: bool,
        #[arg(long, default_value = "Pedestrian")]
        class: String,
    },
    /// Convert every PNG to grayscale, kept as three identical channels.
    Grayscale {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in simulated detector for one body part.
    Simulate {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        part: BodyPart,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class AP and mAP of a detection directory.
    Eval {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Classes to score; every ground-truth class when omitted.
        #[arg(long, value_delimiter = ',')]
        class: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value = "confidence")]
        mode: CurveMode,
        #[arg(long, value_delimiter = ',')]
        iou_grid: Vec<f64>,
    },
    /// Per-frame inherent confidence for several detection directories.
    Confidence {
        /// `tag=dir` pairs, e.g. `full=d/full,upper=d/upper`.
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_tagged)]
        dets: Vec<(String, PathBuf)>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "Pedestrian")]
        class: String,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value = "max")]
        aggregate: Aggregation,
    },
    /// Confidence shift statistics between two detection directories.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        variant: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "Pedestrian")]
        class: String,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value_t = 0.5)]
        lost_threshold: f64,
    },
    /// Fuse full, upper and lower detections through the gated cascade.
    Cascade {
        #[arg(long)]
        full: PathBuf,
        #[arg(long)]
        upper: PathBuf,
        #[arg(long)]
        lower: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Parameter file (`key=value` lines).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Parameter overrides, `key=value`.
        #[arg(long = "set", value_parser = parse_kv)]
        overrides: Vec<(String, String)>,
        /// Ground truth; adds `eval.csv` when given.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value = "Pedestrian")]
        class: String,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Run the whole experiment from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Config overrides, `key=value`.
        #[arg(long = "set", value_parser = parse_kv)]
        overrides: Vec<(String, String)>,
    },
}

fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

fn parse_tagged(s: &str) -> std::result::Result<(String, PathBuf), String> {
    parse_kv(s).map(|(k, v)| (k, PathBuf::from(v)))
}

fn run(cli: Cli) -> Result<()> {
    let pool = pipeline::thread_pool(cli.jobs)?;
    let force = cli.force;
    pool.install(|| match cli.command {
        Command::Synth { out, frames, seed } => {
            prepare_out_dir(&out, force)?;
            pipeline::cmd_synth(&out, frames, seed)?;
            pipeline::write_manifest(&out)?;
            println!("wrote {frames} synthetic frames to {}", out.display());
            Ok(())
        }
        Command::Split { labels, ratios, seed, class_only, out } => {
            let m = pipeline::cmd_split(&labels, ratios, seed, class_only.as_deref(), &out)?;
            let [train, test, val] = m.sizes();
            println!("train={train} test={test} validation={val}");
            Ok(())
        }
        Command::SplitLabels { input, output, part, class } => {
            let rep = label_transform::materialize(&input, &output, part, &class, force)?;
            println!("{} frames, {} boxes halved", rep.frames, rep.transformed_objects);
            Ok(())
        }
        Command::Occlude { images, labels, out, kind, texture, width_factor, filter, gray, class } => {
            if kind.is_none() && !gray {
                return Err(Error::InvalidParam("occlude needs --kind, --gray or both".into()));
            }
            prepare_out_dir(&out, force)?;
            let width_factor = width_factor.unwrap_or(match kind {
                Some(OcclusionKind::Wall) => 1.5,
                _ => 1.0,
            });
            let warnings = pipeline::cmd_occlude(&OccludeArgs {
                images: &images,
                labels: &labels,
                kind,
                texture: texture.as_deref(),
                width_factor,
                filter,
                gray,
                target_class: &class,
                out: &out,
            })?;
            println!("done, {} warnings", warnings.len());
            Ok(())
        }
        Command::Grayscale { images, out } => {
            prepare_out_dir(&out, force)?;
            let n = pipeline::cmd_grayscale(&images, &out)?;
            println!("converted {n} images");
            Ok(())
        }
        Command::Simulate { images, labels, part, seed, out } => {
            prepare_out_dir(&out, force)?;
            let n = pipeline::cmd_simulate(&images, &labels, part, seed, &out)?;
            println!("wrote detections for {n} frames");
            Ok(())
        }
        Command::Eval { dets, gt, out, class, iou, mode, iou_grid } => {
            prepare_out_dir(&out, force)?;
            let grid = if iou_grid.is_empty() { default_iou_grid() } else { iou_grid };
            let report = pipeline::cmd_eval(&dets, &gt, &class, iou, mode, &grid, &out)?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Confidence { dets, gt, out, class, iou, aggregate } => {
            prepare_out_dir(&out, force)?;
            let series = pipeline::cmd_confidence(&dets, &gt, &class, iou, aggregate, &out)?;
            for tag in series.tags() {
                println!("{tag}: mean {:.4} over {} frames", series.mean(tag)?, series.len());
            }
            Ok(())
        }
        Command::Compare { baseline, variant, gt, out, class, iou, lost_threshold } => {
            prepare_out_dir(&out, force)?;
            let r = pipeline::cmd_compare(&baseline, &variant, &gt, &class, iou, lost_threshold, &out)?;
            let s = &r.stats;
            println!(
                "mean decrease {:.4}, lost {:.4}, improved {:.4}, degraded {:.4}, unchanged {:.4} ({} frames)",
                s.mean_decrease, s.frac_lost, s.frac_improved, s.frac_degraded, s.frac_unchanged, s.num_frames
            );
            Ok(())
        }
        Command::Cascade { full, upper, lower, out, params, overrides, gt, class, iou } => {
            let mut p = match params {
                Some(path) => CascadeParams::load(&path)?,
                None => CascadeParams::default(),
            };
            for (k, v) in &overrides {
                p.set(k, v)?;
            }
            prepare_out_dir(&out, force)?;
            let s = pipeline::cmd_cascade(&full, &upper, &lower, &p, &class, gt.as_deref(), iou, &out)?;
            println!("{} frames, {} hypotheses ({} gated)", s.frames, s.hypotheses, s.gated);
            if let Some(report) = s.eval {
                print!("{}", report.to_csv());
            }
            Ok(())
        }
        Command::Pipeline { config, overrides } => {
            let mut c = PipelineConfig::load(&config)?;
            for (k, v) in &overrides {
                c.set(k, v)?;
            }
            let summary = pipeline::run_pipeline(&c, force)?;
            println!("variant,model,map,mean_confidence");
            for r in &summary.rows {
                let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
                println!("{},{},{},{}", r.variant, r.model, fmt(r.map), fmt(r.mean_confidence));
            }
            println!("{} artifacts, {} warnings, written to {}", summary.artifacts, summary.warnings.len(), c.out.display());
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
