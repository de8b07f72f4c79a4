//! Experiment configuration, stored as a flat `key=value` text file.
//!
//! Relative paths are resolved against the working directory of the run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cascade::CascadeParams;
use crate::error::{Error, Result};
use crate::eval_metrics::{default_iou_grid, CurveMode};
use crate::kitti_io::SplitRatios;
use crate::occlusion_synth::ResizeFilter;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset_root: PathBuf,
    /// Label directory, relative to `dataset_root`.
    pub labels: String,
    /// Image directory, relative to `dataset_root`.
    pub images: String,
    /// Precomputed detections laid out as `<dir>/<variant>/<model>/*.txt`,
    /// relative to `dataset_root`. When unset the simulated detector is used.
    pub detections: Option<String>,
    pub target_class: String,
    pub iou_threshold: f64,
    pub ap_mode: CurveMode,
    pub iou_grid: Vec<f64>,
    /// Occluder textures; built-in textures when unset.
    pub box_texture: Option<PathBuf>,
    pub wall_texture: Option<PathBuf>,
    pub box_width_factor: f64,
    pub wall_width_factor: f64,
    pub resize_filter: ResizeFilter,
    pub cascade: CascadeParams,
    pub lost_threshold: f64,
    pub split_ratios: SplitRatios,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::from("."),
            labels: "labels".into(),
            images: "images".into(),
            detections: None,
            target_class: "Pedestrian".into(),
            iou_threshold: 0.5,
            ap_mode: CurveMode::ConfidenceSweep,
            iou_grid: default_iou_grid(),
            box_texture: None,
            wall_texture: None,
            box_width_factor: 1.0,
            wall_width_factor: 1.5,
            resize_filter: ResizeFilter::Bilinear,
            cascade: CascadeParams::default(),
            lost_threshold: 0.5,
            split_ratios: SplitRatios::new(0.4, 0.4, 0.2).expect("valid default ratios"),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl PipelineConfig {
    pub fn labels_dir(&self) -> PathBuf {
        self.dataset_root.join(&self.labels)
    }

    pub fn images_dir(&self) -> PathBuf {
        self.dataset_root.join(&self.images)
    }

    pub fn detections_dir(&self) -> Option<PathBuf> {
        self.detections.as_ref().map(|d| self.dataset_root.join(d))
    }

    pub fn to_text(&self) -> String {
        let opt_path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("dataset_root", self.dataset_root.display().to_string());
        kv("labels", self.labels.clone());
        kv("images", self.images.clone());
        kv("detections", self.detections.clone().unwrap_or_default());
        kv("target_class", self.target_class.clone());
        kv("iou_threshold", self.iou_threshold.to_string());
        kv("ap_mode", self.ap_mode.to_string());
        kv("iou_grid", join_f64(&self.iou_grid));
        kv("box_texture", opt_path(&self.box_texture));
        kv("wall_texture", opt_path(&self.wall_texture));
        kv("box_width_factor", self.box_width_factor.to_string());
        kv("wall_width_factor", self.wall_width_factor.to_string());
        kv("resize_filter", self.resize_filter.as_str().to_string());
        for line in self.cascade.to_text().lines() {
            let (k, v) = line.split_once('=').expect("cascade params are key=value");
            kv(&format!("cascade.{k}"), v.to_string());
        }
        kv("lost_threshold", self.lost_threshold.to_string());
        let r = self.split_ratios;
        kv("split_ratios", join_f64(&[r.train, r.test, r.validation]));
        kv("out", self.out.display().to_string());
        kv("seed", self.seed.to_string());
        out
    }

    /// Unknown keys are errors; missing keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            c.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        c.cascade.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("`{key}`: bad number `{v}`")))
        };
        let opt = |v: &str| (!v.is_empty()).then(|| v.to_string());
        match key {
            "dataset_root" => self.dataset_root = PathBuf::from(value),
            "labels" => self.labels = value.to_string(),
            "images" => self.images = value.to_string(),
            "detections" => self.detections = opt(value),
            "target_class" => self.target_class = value.to_string(),
            "iou_threshold" => self.iou_threshold = num(value)?,
            "ap_mode" => self.ap_mode = value.parse()?,
            "iou_grid" => {
                self.iou_grid = value
                    .split(',')
                    .map(|v| num(v.trim()))
                    .collect::<Result<_>>()?
            }
            "box_texture" => self.box_texture = opt(value).map(PathBuf::from),
            "wall_texture" => self.wall_texture = opt(value).map(PathBuf::from),
            "box_width_factor" => self.box_width_factor = num(value)?,
            "wall_width_factor" => self.wall_width_factor = num(value)?,
            "resize_filter" => self.resize_filter = value.parse()?,
            "lost_threshold" => self.lost_threshold = num(value)?,
            "split_ratios" => self.split_ratios = value.parse()?,
            "out" => self.out = PathBuf::from(value),
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("`seed`: bad integer `{value}`")))?
            }
            other => match other.strip_prefix("cascade.") {
                Some(k) => self.cascade.set(k, value)?,
                None => return Err(Error::Config(format!("unknown key `{other}`"))),
            },
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::in_file(path, e))
    }

    /// Checks values and that every referenced input path exists.
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold {} not in (0, 1]",
                self.iou_threshold
            )));
        }
        if self.iou_grid.is_empty() || self.iou_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::Config("iou_grid values must be in (0, 1]".into()));
        }
        for (name, f) in [
            ("box_width_factor", self.box_width_factor),
            ("wall_width_factor", self.wall_width_factor),
        ] {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.lost_threshold) {
            return Err(Error::Config("lost_threshold must be in [0, 1]".into()));
        }
        self.cascade.validate()?;
        let mut required = vec![self.labels_dir(), self.images_dir()];
        required.extend(self.detections_dir());
        required.extend(self.box_texture.clone());
        required.extend(self.wall_texture.clone());
        for p in required {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "path does not exist: {}",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}
