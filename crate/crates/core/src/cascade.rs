//! Confidence-gated fusion of full, upper-half and lower-half body detections.
//!
//! Full-body detections at or above the gate threshold pass through untouched.
//! Below it, or where the full-body model found nothing, half-body detections
//! are paired, reconstructed into full-body boxes and fused. The spread of the
//! contributing scores (`agreement`) flags a possible partial occlusion: halves
//! that disagree strongly suggest part of the body is hidden.

use std::fmt::{self, Write as _};
use std::path::Path;

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::eval_metrics::iou;
use crate::kitti_io::{fmt_num, Annotation, Detection, FrameAnnotations};
use crate::label_transform::BodyPart;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub full: f64,
    pub upper: f64,
    pub lower: f64,
}

impl FusionWeights {
    fn get(&self, part: BodyPart) -> f64 {
        match part {
            BodyPart::Full => self.full,
            BodyPart::Upper => self.upper,
            BodyPart::Lower => self.lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeParams {
    /// Full-body detections scoring at least this pass through ungated.
    pub gate_threshold: f64,
    /// Minimum horizontal overlap (relative to the narrower box) for pairing halves.
    pub pairing_min_horizontal_overlap: f64,
    /// Allowed gap between upper bottom and lower top, as a fraction of the upper height.
    pub vertical_adjacency_tolerance: f64,
    pub fusion_weights: FusionWeights,
    /// Minimum IoU for associating a half-body hypothesis with a low full-body detection.
    pub association_iou: f64,
    /// Half-body hypotheses overlapping a passed-through detection above this IoU merge into it.
    pub merge_iou: f64,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self {
            gate_threshold: 0.5,
            pairing_min_horizontal_overlap: 0.3,
            vertical_adjacency_tolerance: 0.5,
            fusion_weights: FusionWeights {
                full: 0.5,
                upper: 0.25,
                lower: 0.25,
            },
            association_iou: 0.5,
            merge_iou: 0.5,
        }
    }
}

impl CascadeParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParam(format!(
                    "{name} must be in [0, 1], got {v}"
                )))
            }
        };
        unit("gate_threshold", self.gate_threshold)?;
        unit(
            "pairing_min_horizontal_overlap",
            self.pairing_min_horizontal_overlap,
        )?;
        unit("association_iou", self.association_iou)?;
        unit("merge_iou", self.merge_iou)?;
        if !(self.vertical_adjacency_tolerance.is_finite()
            && self.vertical_adjacency_tolerance >= 0.0)
        {
            return Err(Error::InvalidParam(
                "vertical_adjacency_tolerance must be >= 0".into(),
            ));
        }
        let w = self.fusion_weights;
        if [w.full, w.upper, w.lower]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::InvalidParam(
                "fusion weights must be non-negative".into(),
            ));
        }
        if (w.full + w.upper + w.lower - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam("fusion weights must sum to 1".into()));
        }
        Ok(())
    }

    /// Flat `key=value` lines, the same form [`CascadeParams::from_text`] reads.
    pub fn to_text(&self) -> String {
        let w = self.fusion_weights;
        format!(
            "gate_threshold={}\npairing_min_horizontal_overlap={}\nvertical_adjacency_tolerance={}\n\
             fusion_weights={},{},{}\nassociation_iou={}\nmerge_iou={}\n",
            self.gate_threshold,
            self.pairing_min_horizontal_overlap,
            self.vertical_adjacency_tolerance,
            w.full,
            w.upper,
            w.lower,
            self.association_iou,
            self.merge_iou
        )
    }

    /// Missing keys keep their defaults; `#` starts a comment line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = CascadeParams::default();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{line}`")))?;
            p.set(key.trim(), value.trim())?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("`{key}`: bad number `{v}`")))
        };
        match key {
            "gate_threshold" => self.gate_threshold = num(value)?,
            "pairing_min_horizontal_overlap" => self.pairing_min_horizontal_overlap = num(value)?,
            "vertical_adjacency_tolerance" => self.vertical_adjacency_tolerance = num(value)?,
            "association_iou" => self.association_iou = num(value)?,
            "merge_iou" => self.merge_iou = num(value)?,
            "fusion_weights" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|v| num(v.trim()))
                    .collect::<Result<_>>()?;
                let [full, upper, lower] = parts[..] else {
                    return Err(Error::Config("fusion_weights needs three values".into()));
                };
                self.fusion_weights = FusionWeights { full, upper, lower };
            }
            other => return Err(Error::Config(format!("unknown cascade key `{other}`"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::in_file(path, e))
    }
}

/// Overlap of the two horizontal spans relative to the narrower one.
pub fn horizontal_overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let overlap = a.right().min(b.right()) - a.left().max(b.left());
    if overlap <= 0.0 {
        return 0.0;
    }
    (overlap / a.width().min(b.width())).clamp(0.0, 1.0)
}

fn admissible(upper: &BoundingBox, lower: &BoundingBox, params: &CascadeParams) -> bool {
    horizontal_overlap(upper, lower) >= params.pairing_min_horizontal_overlap
        && (lower.top() - upper.bottom()).abs()
            <= params.vertical_adjacency_tolerance * upper.height()
}

/// How far a pair is from perfectly stacked halves; 0 for an exact fit.
fn misfit(upper: &BoundingBox, lower: &BoundingBox) -> f64 {
    (lower.top() - upper.bottom()).abs() / upper.height() + (1.0 - horizontal_overlap(upper, lower))
}

/// Greedy one-to-one pairing of upper and lower detections.
///
/// Admissible pairs are taken by descending combined score, ties going to the
/// better geometric fit and then to input order.
pub fn pair_halves(
    upper: &[Detection],
    lower: &[Detection],
    params: &CascadeParams,
) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (u, ud) in upper.iter().enumerate() {
        for (l, ld) in lower.iter().enumerate() {
            if admissible(ud.bbox(), ld.bbox(), params) {
                candidates.push((u, l, ud.score + ld.score, misfit(ud.bbox(), ld.bbox())));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(a.3.total_cmp(&b.3))
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    let mut used_u = vec![false; upper.len()];
    let mut used_l = vec![false; lower.len()];
    let mut pairs = Vec::new();
    for (u, l, _, _) in candidates {
        if !used_u[u] && !used_l[l] {
            used_u[u] = true;
            used_l[l] = true;
            pairs.push((u, l));
        }
    }
    pairs
}

/// Full-body box from a stacked pair: `(min left, upper top, max right, lower bottom)`.
///
/// Falls back to the hull of both boxes if the lower box ends above the upper one.
pub fn reconstruct_full(upper: &BoundingBox, lower: &BoundingBox) -> BoundingBox {
    BoundingBox::new(
        upper.left().min(lower.left()),
        upper.top(),
        upper.right().max(lower.right()),
        lower.bottom(),
    )
    .unwrap_or_else(|_| upper.union_hull(lower))
}

/// Full-body box from a single half, extended by its own height.
pub fn extend_half(half: &BoundingBox, part: BodyPart) -> BoundingBox {
    let h = half.height();
    let (top, bottom) = match part {
        BodyPart::Full => return *half,
        BodyPart::Upper => (half.top(), half.bottom() + h),
        BodyPart::Lower => (half.top() - h, half.bottom()),
    };
    BoundingBox::new(half.left(), top, half.right(), bottom).unwrap_or(*half)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceDetection {
    pub part: BodyPart,
    pub score: f64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeHypothesis {
    pub bbox: BoundingBox,
    pub fused_score: f64,
    /// Largest pairwise score difference among the sources.
    pub agreement: f64,
    /// At most one source per body part, ordered full, upper, lower.
    pub sources: Vec<SourceDetection>,
    pub gated: bool,
}

impl CascadeHypothesis {
    fn from_sources(
        bbox: BoundingBox,
        mut sources: Vec<SourceDetection>,
        gated: bool,
        weights: &FusionWeights,
    ) -> Self {
        sources.sort_by_key(|s| s.part);
        Self {
            bbox,
            fused_score: fused_score(&sources, weights),
            agreement: agreement(&sources),
            sources,
            gated,
        }
    }

    pub fn has_part(&self, part: BodyPart) -> bool {
        self.sources.iter().any(|s| s.part == part)
    }

    /// `full:0.3|upper:0.2|lower:0.8`
    pub fn sources_label(&self) -> String {
        self.sources
            .iter()
            .map(|s| format!("{}:{}", s.part, s.score))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Weighted mean of source scores with weights renormalized over the present
/// parts; a plain mean if those weights are all zero.
fn fused_score(sources: &[SourceDetection], weights: &FusionWeights) -> f64 {
    let total: f64 = sources.iter().map(|s| weights.get(s.part)).sum();
    let fused = if total > 0.0 {
        sources
            .iter()
            .map(|s| weights.get(s.part) * s.score)
            .sum::<f64>()
            / total
    } else {
        sources.iter().map(|s| s.score).sum::<f64>() / sources.len() as f64
    };
    // keep inside the convex hull despite rounding
    let lo = sources
        .iter()
        .map(|s| s.score)
        .fold(f64::INFINITY, f64::min);
    let hi = sources
        .iter()
        .map(|s| s.score)
        .fold(f64::NEG_INFINITY, f64::max);
    fused.clamp(lo, hi)
}

fn agreement(sources: &[SourceDetection]) -> f64 {
    let lo = sources
        .iter()
        .map(|s| s.score)
        .fold(f64::INFINITY, f64::min);
    let hi = sources
        .iter()
        .map(|s| s.score)
        .fold(f64::NEG_INFINITY, f64::max);
    if sources.len() < 2 {
        0.0
    } else {
        hi - lo
    }
}

fn source(part: BodyPart, det: &Detection) -> SourceDetection {
    SourceDetection {
        part,
        score: det.score,
        bbox: *det.bbox(),
    }
}

/// Half-body evidence for one person: a stacked pair or a lone half.
struct HalfGroup {
    bbox: BoundingBox,
    sources: Vec<SourceDetection>,
}

fn half_groups(upper: &[Detection], lower: &[Detection], params: &CascadeParams) -> Vec<HalfGroup> {
    let pairs = pair_halves(upper, lower, params);
    let mut used_u = vec![false; upper.len()];
    let mut used_l = vec![false; lower.len()];
    let mut groups = Vec::new();
    for &(u, l) in &pairs {
        used_u[u] = true;
        used_l[l] = true;
        groups.push(HalfGroup {
            bbox: reconstruct_full(upper[u].bbox(), lower[l].bbox()),
            sources: vec![
                source(BodyPart::Upper, &upper[u]),
                source(BodyPart::Lower, &lower[l]),
            ],
        });
    }
    for (part, dets, used) in [
        (BodyPart::Upper, upper, &used_u),
        (BodyPart::Lower, lower, &used_l),
    ] {
        for (_, d) in dets.iter().enumerate().filter(|(i, _)| !used[*i]) {
            groups.push(HalfGroup {
                bbox: extend_half(d.bbox(), part),
                sources: vec![source(part, d)],
            });
        }
    }
    groups
}

/// Fuse one frame's full, upper and lower detections.
///
/// Output order: passed-through full detections (input order), then gated
/// hypotheses anchored on low full detections (input order), then standalone
/// half-body hypotheses.
pub fn cascade_decide(
    full: &[Detection],
    upper: &[Detection],
    lower: &[Detection],
    params: &CascadeParams,
) -> Vec<CascadeHypothesis> {
    let weights = &params.fusion_weights;
    let tau = params.gate_threshold;

    let mut passed: Vec<CascadeHypothesis> = full
        .iter()
        .filter(|d| d.score >= tau)
        .map(|d| {
            CascadeHypothesis::from_sources(
                *d.bbox(),
                vec![source(BodyPart::Full, d)],
                false,
                weights,
            )
        })
        .collect();

    // A missing full-body detection has confidence 0, so half-body evidence
    // only opens the gate when 0 < tau.
    let groups = if tau > 0.0 {
        half_groups(upper, lower, params)
    } else {
        Vec::new()
    };
    let mut group_used = vec![false; groups.len()];

    let mut anchored = Vec::new();
    for d in full.iter().filter(|d| d.score < tau) {
        let best = groups
            .iter()
            .enumerate()
            .filter(|(g, _)| !group_used[*g])
            .map(|(g, grp)| (g, iou(&grp.bbox, d.bbox())))
            .filter(|(_, v)| *v >= params.association_iou && *v > 0.0)
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let mut sources = vec![source(BodyPart::Full, d)];
        if let Some((g, _)) = best {
            group_used[g] = true;
            sources.extend(groups[g].sources.iter().cloned());
        }
        anchored.push(CascadeHypothesis::from_sources(
            *d.bbox(),
            sources,
            true,
            weights,
        ));
    }

    let mut standalone: Vec<CascadeHypothesis> = groups
        .into_iter()
        .zip(group_used)
        .filter(|(_, used)| !used)
        .map(|(g, _)| CascadeHypothesis::from_sources(g.bbox, g.sources, true, weights))
        .collect();

    // Merge standalone half-body hypotheses into overlapping passed detections,
    // strongest first; a passed detection takes each body part at most once.
    standalone.sort_by(|a, b| b.fused_score.total_cmp(&a.fused_score));
    let mut kept = Vec::new();
    for hyp in standalone {
        let target = passed
            .iter()
            .enumerate()
            .filter(|(_, p)| hyp.sources.iter().all(|s| !p.has_part(s.part)))
            .map(|(i, p)| (i, iou(&p.bbox, &hyp.bbox)))
            .filter(|(_, v)| *v > params.merge_iou)
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match target {
            Some((i, _)) => {
                let p = &mut passed[i];
                p.sources.extend(hyp.sources);
                p.sources.sort_by_key(|s| s.part);
                p.agreement = agreement(&p.sources);
            }
            None => kept.push(hyp),
        }
    }

    passed.extend(anchored);
    passed.extend(kept);
    passed
}

/// Detections file for one frame (16-field layout, score = fused score).
pub fn to_frame(
    frame_id: &str,
    hypotheses: &[CascadeHypothesis],
    class_name: &str,
) -> FrameAnnotations {
    let mut frame = FrameAnnotations::new(frame_id);
    for h in hypotheses {
        let det = Detection::new(class_name, h.bbox, h.fused_score.clamp(0.0, 1.0))
            .expect("fused score is clamped to [0, 1]");
        frame.objects.push(Annotation::Detection(det));
    }
    frame
}

pub const SIDECAR_HEADER: &str =
    "frame_id,left,top,right,bottom,fused_score,agreement,gated,sources";

/// Sidecar rows for one frame, no header.
pub fn sidecar_rows(frame_id: &str, hypotheses: &[CascadeHypothesis]) -> String {
    let mut out = String::new();
    for h in hypotheses {
        let _ = writeln!(
            out,
            "{frame_id},{},{},{},{},{},{},{},{}",
            fmt_num(h.bbox.left()),
            fmt_num(h.bbox.top()),
            fmt_num(h.bbox.right()),
            fmt_num(h.bbox.bottom()),
            h.fused_score,
            h.agreement,
            h.gated,
            h.sources_label()
        );
    }
    out
}

impl fmt::Display for CascadeHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} score={} agreement={} gated={} [{}]",
            self.bbox,
            self.fused_score,
            self.agreement,
            self.gated,
            self.sources_label()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_transform::split_box;

    fn b(l: f64, t: f64, r: f64, bo: f64) -> BoundingBox {
        BoundingBox::new(l, t, r, bo).unwrap()
    }

    fn det(bb: BoundingBox, score: f64) -> Detection {
        Detection::new("Pedestrian", bb, score).unwrap()
    }

    #[test]
    fn horizontal_overlap_cases() {
        assert_eq!(
            horizontal_overlap(&b(0.0, 0.0, 10.0, 5.0), &b(0.0, 9.0, 10.0, 20.0)),
            1.0
        );
        assert_eq!(
            horizontal_overlap(&b(0.0, 0.0, 10.0, 5.0), &b(20.0, 0.0, 30.0, 5.0)),
            0.0
        );
        assert_eq!(
            horizontal_overlap(&b(0.0, 0.0, 10.0, 5.0), &b(5.0, 0.0, 20.0, 5.0)),
            0.5
        );
    }

    #[test]
    fn stacked_halves_pair() {
        let p = CascadeParams::default();
        let up = [det(b(0.0, 0.0, 10.0, 10.0), 0.5)];
        let lo = [det(b(0.0, 10.0, 10.0, 20.0), 0.5)];
        assert_eq!(pair_halves(&up, &lo, &p), vec![(0, 0)]);
        let far = [det(b(50.0, 10.0, 60.0, 20.0), 0.5)];
        assert!(pair_halves(&up, &far, &p).is_empty());
        let below = [det(b(0.0, 30.0, 10.0, 40.0), 0.5)];
        assert!(pair_halves(&up, &below, &p).is_empty());
    }

    #[test]
    fn higher_combined_score_wins_the_lower() {
        let p = CascadeParams::default();
        let up = [
            det(b(0.0, 0.0, 10.0, 10.0), 0.4),
            det(b(1.0, 1.0, 11.0, 10.0), 0.8),
        ];
        let lo = [det(b(0.0, 10.0, 10.0, 20.0), 0.6)];
        assert_eq!(pair_halves(&up, &lo, &p), vec![(1, 0)]);
    }

    #[test]
    fn equal_scores_prefer_better_fit() {
        let p = CascadeParams::default();
        let up = [
            det(b(0.0, 4.0, 10.0, 12.0), 0.5),
            det(b(0.0, 0.0, 10.0, 10.0), 0.5),
        ];
        let lo = [det(b(0.0, 10.0, 10.0, 20.0), 0.5)];
        assert_eq!(pair_halves(&up, &lo, &p), vec![(1, 0)]);
    }

    #[test]
    fn reconstruction() {
        let full = b(100.0, 50.0, 140.0, 150.0);
        let r = reconstruct_full(
            &split_box(&full, BodyPart::Upper),
            &split_box(&full, BodyPart::Lower),
        );
        assert_eq!(r, full);
        assert_eq!(
            reconstruct_full(&b(0.0, 0.0, 10.0, 10.0), &b(2.0, 10.0, 12.0, 20.0)),
            b(0.0, 0.0, 12.0, 20.0)
        );
        assert_eq!(
            extend_half(&b(0.0, 0.0, 10.0, 10.0), BodyPart::Upper),
            b(0.0, 0.0, 10.0, 20.0)
        );
        assert_eq!(
            extend_half(&b(0.0, 10.0, 10.0, 20.0), BodyPart::Lower),
            b(0.0, 0.0, 10.0, 20.0)
        );
    }

    #[test]
    fn confident_full_passes_through() {
        let out = cascade_decide(
            &[det(b(0.0, 0.0, 10.0, 20.0), 0.9)],
            &[],
            &[],
            &CascadeParams::default(),
        );
        assert_eq!(out.len(), 1);
        assert!(!out[0].gated);
        assert_eq!(out[0].agreement, 0.0);
        assert_eq!(out[0].fused_score, 0.9);
    }

    #[test]
    fn low_full_with_stacked_halves() {
        let full = b(0.0, 0.0, 10.0, 20.0);
        let out = cascade_decide(
            &[det(full, 0.3)],
            &[det(split_box(&full, BodyPart::Upper), 0.2)],
            &[det(split_box(&full, BodyPart::Lower), 0.8)],
            &CascadeParams::default(),
        );
        assert_eq!(out.len(), 1);
        let h = &out[0];
        assert!(h.gated);
        assert!((h.fused_score - 0.40).abs() < 1e-12);
        assert!((h.agreement - 0.6).abs() < 1e-12);
        assert_eq!(h.sources_label(), "full:0.3|upper:0.2|lower:0.8");
    }

    #[test]
    fn halves_without_full_renormalize() {
        let full = b(0.0, 0.0, 10.0, 20.0);
        let out = cascade_decide(
            &[],
            &[det(split_box(&full, BodyPart::Upper), 0.7)],
            &[det(split_box(&full, BodyPart::Lower), 0.7)],
            &CascadeParams::default(),
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, full);
        assert!((out[0].fused_score - 0.7).abs() < 1e-12);
        assert_eq!(out[0].agreement, 0.0);
    }

    #[test]
    fn zero_gate_is_pass_through_only() {
        let p = CascadeParams {
            gate_threshold: 0.0,
            ..CascadeParams::default()
        };
        let out = cascade_decide(
            &[det(b(0.0, 0.0, 10.0, 20.0), 0.1)],
            &[det(b(50.0, 0.0, 60.0, 10.0), 0.9)],
            &[],
            &p,
        );
        assert_eq!(out.len(), 1);
        assert!(!out[0].gated);
    }

    #[test]
    fn halves_merge_into_confident_full() {
        let full = b(0.0, 0.0, 10.0, 20.0);
        let out = cascade_decide(
            &[det(full, 0.9)],
            &[det(split_box(&full, BodyPart::Upper), 0.6)],
            &[det(split_box(&full, BodyPart::Lower), 0.8)],
            &CascadeParams::default(),
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].fused_score, 0.9);
        assert!((out[0].agreement - 0.3).abs() < 1e-12);
        assert_eq!(out[0].sources.len(), 3);
        assert!(!out[0].gated);
    }

    #[test]
    fn empty_input() {
        assert!(cascade_decide(&[], &[], &[], &CascadeParams::default()).is_empty());
    }

    #[test]
    fn params_text_round_trip_and_validation() {
        let p = CascadeParams {
            gate_threshold: 0.35,
            fusion_weights: FusionWeights {
                full: 0.6,
                upper: 0.2,
                lower: 0.2,
            },
            ..CascadeParams::default()
        };
        assert_eq!(CascadeParams::from_text(&p.to_text()).unwrap(), p);
        assert!(CascadeParams::from_text("fusion_weights=0.5,0.5,0.5").is_err());
        assert!(CascadeParams::from_text("gate_threshold=1.5").is_err());
        assert!(CascadeParams::from_text("bogus=1").is_err());
        assert_eq!(
            CascadeParams::from_text("# defaults\n").unwrap(),
            CascadeParams::default()
        );
    }

    #[test]
    fn sidecar_and_frame_output() {
        let full = b(0.0, 0.0, 10.0, 20.0);
        let hyps = cascade_decide(&[det(full, 0.9)], &[], &[], &CascadeParams::default());
        assert_eq!(
            sidecar_rows("000003", &hyps),
            "000003,0.00,0.00,10.00,20.00,0.9,0,false,full:0.9\n"
        );
        let f = to_frame("000003", &hyps, "Pedestrian");
        assert_eq!(f.objects[0].score(), Some(0.9));
    }
}
