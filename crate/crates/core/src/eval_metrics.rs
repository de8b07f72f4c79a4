//! Detection evaluation: IoU, greedy matching, precision-recall curves, AP/mAP
//! and per-frame inherent confidence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::kitti_io::{Detection, FrameSet, ObjectLabel, DONT_CARE};

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchPair {
    pub detection: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

/// Indices refer to the unfiltered input slices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_groundtruth: Vec<usize>,
    pub iou_threshold: f64,
}

/// Indices of `dets` of `class_name`, by descending score; ties keep input order.
fn score_order(dets: &[Detection], class_name: &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].class_name() == class_name)
        .collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// Greedy score-ordered matching.
///
/// Each detection of `class_name`, from highest score down, takes the unmatched
/// ground truth with maximal IoU (ties to the lower index) when that IoU reaches
/// `iou_threshold`.
pub fn match_detections(
    dets: &[Detection],
    gts: &[ObjectLabel],
    class_name: &str,
    iou_threshold: f64,
) -> MatchResult {
    let gt_idx: Vec<usize> = (0..gts.len())
        .filter(|&i| gts[i].class_name == class_name)
        .collect();
    let mut taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    let mut unmatched_detections = Vec::new();

    for d in score_order(dets, class_name) {
        let mut best: Option<(usize, f64)> = None;
        for &g in &gt_idx {
            if taken[g] {
                continue;
            }
            let v = iou(dets[d].bbox(), &gts[g].bbox);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) if v >= iou_threshold && v > 0.0 => {
                taken[g] = true;
                pairs.push(MatchPair {
                    detection: d,
                    ground_truth: g,
                    iou: v,
                });
            }
            _ => unmatched_detections.push(d),
        }
    }
    unmatched_detections.sort_unstable();
    let unmatched_groundtruth = gt_idx.into_iter().filter(|&g| !taken[g]).collect();
    MatchResult {
        pairs,
        unmatched_detections,
        unmatched_groundtruth,
        iou_threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveMode {
    /// Fixed IoU threshold, sweep the score cutoff.
    #[default]
    ConfidenceSweep,
    /// Score cutoff 0, sweep the IoU threshold over a grid.
    IouSweep,
}

impl CurveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveMode::ConfidenceSweep => "confidence",
            CurveMode::IouSweep => "iou",
        }
    }
}

impl fmt::Display for CurveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confidence" => Ok(CurveMode::ConfidenceSweep),
            "iou" => Ok(CurveMode::IouSweep),
            other => Err(Error::InvalidParam(format!("unknown curve mode `{other}`"))),
        }
    }
}

/// `0.50, 0.55, ..., 0.95`.
pub fn default_iou_grid() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Ordered by descending threshold.
    pub points: Vec<PrPoint>,
    pub mode: CurveMode,
    pub num_gt: usize,
}

impl PrCurve {
    /// No ground truth of the class: precision/recall and AP are undefined.
    pub fn is_undefined(&self) -> bool {
        self.num_gt == 0
    }
}

/// Per-frame detections and ground truth for one class.
struct ClassFrames<'a> {
    frames: Vec<(Vec<Detection>, Vec<ObjectLabel>)>,
    class_name: &'a str,
}

impl<'a> ClassFrames<'a> {
    fn collect(detset: &FrameSet, gtset: &FrameSet, class_name: &'a str) -> Self {
        let ids: BTreeSet<&String> = detset.keys().chain(gtset.keys()).collect();
        let frames = ids
            .into_iter()
            .map(|id| {
                let dets = detset.get(id).map(|f| f.detections()).unwrap_or_default();
                let gts = gtset.get(id).map(|f| f.labels()).unwrap_or_default();
                (dets, gts)
            })
            .collect();
        Self { frames, class_name }
    }

    fn num_gt(&self) -> usize {
        self.frames
            .iter()
            .map(|(_, g)| g.iter().filter(|l| l.class_name == self.class_name).count())
            .sum()
    }

    fn num_det(&self) -> usize {
        self.frames
            .iter()
            .map(|(d, _)| {
                d.iter()
                    .filter(|x| x.class_name() == self.class_name)
                    .count()
            })
            .sum()
    }

    /// `(score, is_true_positive)` for every class detection.
    fn scored_outcomes(&self, iou_threshold: f64) -> Vec<(f64, bool)> {
        let mut out = Vec::new();
        for (dets, gts) in &self.frames {
            let m = match_detections(dets, gts, self.class_name, iou_threshold);
            out.extend(m.pairs.iter().map(|p| (dets[p.detection].score, true)));
            out.extend(
                m.unmatched_detections
                    .iter()
                    .map(|&i| (dets[i].score, false)),
            );
        }
        out
    }

    fn matched(&self, iou_threshold: f64) -> usize {
        self.frames
            .iter()
            .map(|(d, g)| {
                match_detections(d, g, self.class_name, iou_threshold)
                    .pairs
                    .len()
            })
            .sum()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision-recall curve for `class_name`, accumulated over all frames.
///
/// Frames are the union of both sets' ids; a frame missing from one side has
/// no detections (or no ground truth) there. `iou_grid` is only used by
/// [`CurveMode::IouSweep`].
pub fn pr_curve(
    detset: &FrameSet,
    gtset: &FrameSet,
    class_name: &str,
    iou_threshold: f64,
    mode: CurveMode,
    iou_grid: &[f64],
) -> PrCurve {
    let data = ClassFrames::collect(detset, gtset, class_name);
    let num_gt = data.num_gt();
    if num_gt == 0 {
        return PrCurve {
            points: Vec::new(),
            mode,
            num_gt,
        };
    }
    let points = match mode {
        CurveMode::ConfidenceSweep => {
            let mut outcomes = data.scored_outcomes(iou_threshold);
            outcomes.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut points = Vec::new();
            let (mut tp, mut fp) = (0usize, 0usize);
            for (i, &(score, hit)) in outcomes.iter().enumerate() {
                if hit {
                    tp += 1;
                } else {
                    fp += 1;
                }
                let last_of_tie = outcomes.get(i + 1).is_none_or(|next| next.0 != score);
                if last_of_tie {
                    points.push(PrPoint {
                        threshold: score,
                        precision: ratio(tp, tp + fp),
                        recall: ratio(tp, num_gt),
                    });
                }
            }
            points
        }
        CurveMode::IouSweep => {
            let mut grid = iou_grid.to_vec();
            grid.sort_by(|a, b| b.total_cmp(a));
            grid.dedup();
            let num_det = data.num_det();
            grid.into_iter()
                .map(|t| {
                    let tp = data.matched(t);
                    PrPoint {
                        threshold: t,
                        precision: ratio(tp, num_det),
                        recall: ratio(tp, num_gt),
                    }
                })
                .collect()
        }
    };
    PrCurve {
        points,
        mode,
        num_gt,
    }
}

/// All-points interpolated area under the curve.
///
/// Precision at each recall level is replaced by the maximum precision at any
/// recall at least as large, then summed over recall increments. `None` when
/// the curve is undefined (no ground truth); a defined curve without points
/// (ground truth but no detections) has AP 0.
pub fn average_precision(curve: &PrCurve) -> Option<f64> {
    if curve.is_undefined() {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (p.recall, p.precision))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut envelope = 0.0f64;
    for p in pts.iter_mut().rev() {
        envelope = envelope.max(p.1);
        p.1 = envelope;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in pts {
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassEval {
    pub ap: Option<f64>,
    pub num_gt: usize,
    pub num_det: usize,
    /// Matches at the configured IoU threshold with no score cutoff.
    pub num_matched: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_class: BTreeMap<String, ClassEval>,
    /// Mean AP over classes whose AP is defined.
    pub map: Option<f64>,
    pub iou_threshold: f64,
    pub mode: CurveMode,
}

impl EvalReport {
    /// `# mode=<m> iou=<t>` header, then `class,ap,num_gt,num_det,num_matched` rows.
    /// Undefined AP is written as an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# mode={} iou={}\n", self.mode, self.iou_threshold);
        out.push_str("class,ap,num_gt,num_det,num_matched\n");
        for (class, c) in &self.per_class {
            let ap = c.ap.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{class},{ap},{},{},{}",
                c.num_gt, c.num_det, c.num_matched
            );
        }
        out
    }
}

/// Classes present in ground truth, `DontCare` excluded.
pub fn gt_classes(gtset: &FrameSet) -> Vec<String> {
    let set: BTreeSet<&str> = gtset
        .values()
        .flat_map(|f| f.objects.iter().map(|o| o.class_name()))
        .filter(|c| *c != DONT_CARE)
        .collect();
    set.into_iter().map(str::to_string).collect()
}

pub fn evaluate(
    detset: &FrameSet,
    gtset: &FrameSet,
    classes: &[String],
    iou_threshold: f64,
    mode: CurveMode,
    iou_grid: &[f64],
) -> Result<EvalReport> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "IoU threshold must be in (0, 1], got {iou_threshold}"
        )));
    }
    let mut per_class = BTreeMap::new();
    for class in classes {
        let data = ClassFrames::collect(detset, gtset, class);
        let curve = pr_curve(detset, gtset, class, iou_threshold, mode, iou_grid);
        per_class.insert(
            class.clone(),
            ClassEval {
                ap: average_precision(&curve),
                num_gt: data.num_gt(),
                num_det: data.num_det(),
                num_matched: data.matched(iou_threshold),
            },
        );
    }
    let defined: Vec<f64> = per_class.values().filter_map(|c| c.ap).collect();
    let map = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(EvalReport {
        per_class,
        map,
        iou_threshold,
        mode,
    })
}

/// How several matched detections in one frame collapse to one confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::InvalidParam(format!(
                "unknown aggregation `{other}`"
            ))),
        }
    }
}

/// Inherent confidence of one frame: the maximum score among detections
/// matched to a ground truth of `class_name`, or 0 for a missed frame.
pub fn frame_confidence(
    dets: &[Detection],
    gts: &[ObjectLabel],
    class_name: &str,
    iou_threshold: f64,
) -> f64 {
    frame_confidence_with(dets, gts, class_name, iou_threshold, Aggregation::Max)
}

pub fn frame_confidence_with(
    dets: &[Detection],
    gts: &[ObjectLabel],
    class_name: &str,
    iou_threshold: f64,
    aggregation: Aggregation,
) -> f64 {
    let m = match_detections(dets, gts, class_name, iou_threshold);
    let scores = m.pairs.iter().map(|p| dets[p.detection].score);
    match aggregation {
        Aggregation::Max => scores.fold(0.0, f64::max),
        Aggregation::Mean => {
            let n = m.pairs.len();
            if n == 0 {
                0.0
            } else {
                scores.sum::<f64>() / n as f64
            }
        }
    }
}
