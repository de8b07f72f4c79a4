//! Per-frame, per-model confidence tables and their summary statistics.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval_metrics::{frame_confidence_with, Aggregation};
use crate::kitti_io::FrameSet;
use crate::label_transform::{transform_frame, BodyPart};

/// Confidence of each model on each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSeries {
    pub frames: Vec<String>,
    /// `(model_tag, values)`, each `values` aligned with `frames`.
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ConfidenceSeries {
    pub fn new(frames: Vec<String>) -> Self {
        Self {
            frames,
            columns: Vec::new(),
        }
    }

    pub fn push_column(&mut self, tag: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let tag = tag.into();
        if values.len() != self.frames.len() {
            return Err(Error::InvalidParam(format!(
                "column `{tag}` has {} values for {} frames",
                values.len(),
                self.frames.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParam(format!(
                "column `{tag}` has values outside [0, 1]"
            )));
        }
        if self.get(&tag).is_ok() {
            return Err(Error::InvalidParam(format!("duplicate column `{tag}`")));
        }
        self.columns.push((tag, values));
        Ok(())
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(t, _)| t.as_str())
    }

    pub fn get(&self, tag: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn mean(&self, tag: &str) -> Result<f64> {
        let v = self.get(tag)?;
        if v.is_empty() {
            return Err(Error::EmptySeries);
        }
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }

    /// `frame_id,<tag>,...` header, then one row per frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_id");
        for tag in self.tags() {
            out.push(',');
            out.push_str(tag);
        }
        out.push('\n');
        for (i, frame) in self.frames.iter().enumerate() {
            out.push_str(frame);
            for (_, values) in &self.columns {
                let _ = write!(out, ",{}", values[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("series CSV is empty".into()))?;
        let mut head = header.split(',');
        if head.next() != Some("frame_id") {
            return Err(Error::Config("series CSV must start with frame_id".into()));
        }
        let tags: Vec<String> = head.map(str::to_string).collect();
        let mut frames = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); tags.len()];
        for (n, line) in lines.enumerate() {
            let mut cells = line.split(',');
            frames.push(cells.next().unwrap_or_default().to_string());
            let values: Vec<&str> = cells.collect();
            if values.len() != tags.len() {
                return Err(Error::Config(format!(
                    "series CSV row {} has wrong width",
                    n + 2
                )));
            }
            for (col, cell) in cols.iter_mut().zip(values) {
                col.push(cell.parse().map_err(|_| {
                    Error::Config(format!("series CSV row {}: bad value `{cell}`", n + 2))
                })?);
            }
        }
        let mut series = ConfidenceSeries::new(frames);
        for (tag, values) in tags.into_iter().zip(cols) {
            series.push_column(tag, values)?;
        }
        Ok(series)
    }
}

/// Body part a model tag is evaluated against: `upper` and `lower` tags use
/// halved ground truth, everything else the full boxes.
pub fn part_for_tag(tag: &str) -> BodyPart {
    tag.parse().unwrap_or(BodyPart::Full)
}

/// Confidence table over the ground-truth frames containing `class_name`.
///
/// `ground_truth` maps a model tag to the label set it is matched against.
/// Frames are in lexicographic id order; a model missing a frame counts as
/// having no detections there.
pub fn build_series_with<'a>(
    detsets: &[(String, &FrameSet)],
    ground_truth: impl Fn(&str) -> &'a FrameSet,
    frame_universe: &FrameSet,
    class_name: &str,
    iou_threshold: f64,
    aggregation: Aggregation,
) -> Result<ConfidenceSeries> {
    let frames: Vec<String> = frame_universe
        .values()
        .filter(|f| f.count_class(class_name) > 0)
        .map(|f| f.frame_id.clone())
        .collect();
    let mut series = ConfidenceSeries::new(frames);
    for (tag, dets) in detsets {
        let gts = ground_truth(tag);
        let values = series
            .frames
            .iter()
            .map(|id| {
                let frame_dets = match dets.get(id) {
                    Some(f) => f.detections(),
                    None => {
                        log::warn!("model `{tag}` has no detection file for frame {id}");
                        Vec::new()
                    }
                };
                let frame_gts = gts.get(id).map(|f| f.labels()).unwrap_or_default();
                frame_confidence_with(
                    &frame_dets,
                    &frame_gts,
                    class_name,
                    iou_threshold,
                    aggregation,
                )
            })
            .collect();
        series.push_column(tag.clone(), values)?;
    }
    Ok(series)
}

/// [`build_series_with`] where the `upper`/`lower` tags are matched against
/// halves of `gtset` (see [`part_for_tag`]).
pub fn build_series(
    detsets: &[(String, &FrameSet)],
    gtset: &FrameSet,
    class_name: &str,
    iou_threshold: f64,
) -> Result<ConfidenceSeries> {
    let upper = halved(gtset, BodyPart::Upper, class_name);
    let lower = halved(gtset, BodyPart::Lower, class_name);
    build_series_with(
        detsets,
        |tag| match part_for_tag(tag) {
            BodyPart::Full => gtset,
            BodyPart::Upper => &upper,
            BodyPart::Lower => &lower,
        },
        gtset,
        class_name,
        iou_threshold,
        Aggregation::Max,
    )
}

fn halved(gtset: &FrameSet, part: BodyPart, class_name: &str) -> FrameSet {
    gtset
        .iter()
        .map(|(id, f)| (id.clone(), transform_frame(f, part, class_name)))
        .collect()
}

/// Stable sort of all rows by one reference column.
///
/// Returns the permutation (`perm[k]` is the original index of the k-th row)
/// and the reordered series.
pub fn sorted_view(
    series: &ConfidenceSeries,
    reference_tag: &str,
    ascending: bool,
) -> Result<(Vec<usize>, ConfidenceSeries)> {
    let reference = series.get(reference_tag)?;
    let mut perm: Vec<usize> = (0..series.len()).collect();
    perm.sort_by(|&a, &b| {
        let ord = reference[a].total_cmp(&reference[b]);
        if ascending {
            ord
        } else {
            ord.reverse()
        }
    });
    Ok((perm.clone(), apply_permutation(series, &perm)))
}

pub fn apply_permutation(series: &ConfidenceSeries, perm: &[usize]) -> ConfidenceSeries {
    ConfidenceSeries {
        frames: perm.iter().map(|&i| series.frames[i].clone()).collect(),
        columns: series
            .columns
            .iter()
            .map(|(tag, v)| (tag.clone(), perm.iter().map(|&i| v[i]).collect()))
            .collect(),
    }
}

pub const DEFAULT_LOST_THRESHOLD: f64 = 0.5;

/// How one frame's confidence moved from baseline to variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameOutcome {
    /// Drop above the lost threshold, or a positive baseline falling to exactly 0.
    Lost,
    Degraded,
    Unchanged,
    Improved,
}

pub fn classify(baseline: f64, variant: f64, lost_threshold: f64) -> FrameOutcome {
    let decrease = baseline - variant;
    if decrease > lost_threshold || (variant == 0.0 && baseline > 0.0) {
        FrameOutcome::Lost
    } else if decrease < 0.0 {
        FrameOutcome::Improved
    } else if decrease > 0.0 {
        FrameOutcome::Degraded
    } else {
        FrameOutcome::Unchanged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffStats {
    pub mean_decrease: f64,
    pub frac_lost: f64,
    pub frac_improved: f64,
    pub frac_degraded: f64,
    pub frac_unchanged: f64,
    pub lost_threshold: f64,
    pub num_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub baseline_tag: String,
    pub variant_tag: String,
    pub stats: DiffStats,
    /// `baseline[i] - variant[i]`; negative entries are frames the variant improved.
    pub decreases: Vec<f64>,
}

pub fn diff_stats(
    series: &ConfidenceSeries,
    baseline_tag: &str,
    variant_tag: &str,
    lost_threshold: f64,
) -> Result<DiffReport> {
    let base = series.get(baseline_tag)?;
    let var = series.get(variant_tag)?;
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = series.len();
    let mut counts = [0usize; 4];
    let decreases: Vec<f64> = base
        .iter()
        .zip(var)
        .map(|(&b, &v)| {
            let slot = match classify(b, v, lost_threshold) {
                FrameOutcome::Lost => 0,
                FrameOutcome::Improved => 1,
                FrameOutcome::Degraded => 2,
                FrameOutcome::Unchanged => 3,
            };
            counts[slot] += 1;
            b - v
        })
        .collect();
    let frac = |c: usize| c as f64 / n as f64;
    Ok(DiffReport {
        baseline_tag: baseline_tag.to_string(),
        variant_tag: variant_tag.to_string(),
        stats: DiffStats {
            mean_decrease: decreases.iter().sum::<f64>() / n as f64,
            frac_lost: frac(counts[0]),
            frac_improved: frac(counts[1]),
            frac_degraded: frac(counts[2]),
            frac_unchanged: frac(counts[3]),
            lost_threshold,
            num_frames: n,
        },
        decreases,
    })
}

/// Fraction of frames where `tag_a` is strictly more confident than `tag_b`.
pub fn improvement_fraction(series: &ConfidenceSeries, tag_a: &str, tag_b: &str) -> Result<f64> {
    let a = series.get(tag_a)?;
    let b = series.get(tag_b)?;
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    Ok(wins as f64 / series.len() as f64)
}

pub const STATS_CSV_HEADER: &str = "baseline,variant,lost_threshold,num_frames,mean_decrease,\
frac_lost,frac_improved,frac_degraded,frac_unchanged";

/// One CSV row per comparison, header included.
pub fn stats_csv(reports: &[DiffReport]) -> String {
    let mut out = format!("{STATS_CSV_HEADER}\n");
    for r in reports {
        let s = &r.stats;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.baseline_tag,
            r.variant_tag,
            s.lost_threshold,
            s.num_frames,
            s.mean_decrease,
            s.frac_lost,
            s.frac_improved,
            s.frac_degraded,
            s.frac_unchanged
        );
    }
    out
}
