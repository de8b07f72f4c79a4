//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use occlbench::cascade::{cascade_decide, reconstruct_full, CascadeParams};
use occlbench::confidence_analysis::{build_series, diff_stats, ConfidenceSeries};
use occlbench::config::PipelineConfig;
use occlbench::eval_metrics::{average_precision, evaluate, gt_classes, iou, pr_curve, CurveMode};
use occlbench::kitti_io::{self, Detection, FrameAnnotations, FrameSet, ObjectLabel};
use occlbench::label_transform::{split_box, BodyPart};
use occlbench::occlusion_synth::{
    composite, load_image, luma, occlude_frame, to_grayscale, Image, OcclusionKind, OverlaySpec,
    ResizeFilter,
};
use occlbench::pipeline::run_pipeline;
use occlbench::BoundingBox;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

fn bundled_labels() -> FrameSet {
    kitti_io::read_dir(&assets().join("synthetic/labels")).expect("bundled labels")
}

fn bundled_image(id: &str) -> Image {
    load_image(&assets().join(format!("synthetic/images/{id}.png"))).expect("bundled image")
}

fn bb(l: f64, t: f64, r: f64, b: f64) -> BoundingBox {
    BoundingBox::new(l, t, r, b).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// --- AP oracle -------------------------------------------------------------

fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let h = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = w * h;
    inter / (a.area() + b.area() - inter)
}

struct Instance {
    /// (frame, box, score)
    dets: Vec<(usize, BoundingBox, f64)>,
    gts: Vec<(usize, BoundingBox)>,
}

/// Number of true positives among `subset` (detection indices), matching frame
/// by frame in descending score order with index tie-breaks.
fn oracle_true_positives(inst: &Instance, subset: &[usize], thr: f64) -> usize {
    let mut order = subset.to_vec();
    order.sort_by(|&a, &b| {
        inst.dets[b]
            .2
            .partial_cmp(&inst.dets[a].2)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; inst.gts.len()];
    let mut tp = 0;
    for d in order {
        let (frame, dbox, _) = inst.dets[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, (gframe, gbox)) in inst.gts.iter().enumerate() {
            if *gframe != frame || taken[g] {
                continue;
            }
            let v = oracle_iou(&dbox, gbox);
            if v >= thr && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            tp += 1;
        }
    }
    tp
}

/// AP as the integral of the interpolated precision: recall steps are
/// multiples of 1/G, so the integral is a sum over G levels of the best
/// precision among all score thresholds reaching that recall.
fn oracle_ap(inst: &Instance, thr: f64) -> Option<f64> {
    let g = inst.gts.len();
    if g == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = inst.dets.iter().map(|d| d.2).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut points = Vec::new();
    for t in thresholds {
        let subset: Vec<usize> = (0..inst.dets.len())
            .filter(|&i| inst.dets[i].2 >= t)
            .collect();
        let tp = oracle_true_positives(inst, &subset, thr);
        points.push((tp as f64 / g as f64, tp as f64 / subset.len() as f64));
    }
    let mut ap = 0.0;
    for k in 1..=g {
        let level = k as f64 / g as f64;
        let best = points
            .iter()
            .filter(|(r, _)| *r >= level - 1e-12)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        ap += best / g as f64;
    }
    Some(ap)
}

fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let l = rng.random_range(0.0..80.0);
    let t = rng.random_range(0.0..80.0);
    bb(
        l,
        t,
        l + rng.random_range(5.0..30.0),
        t + rng.random_range(5.0..40.0),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let frames = rng.random_range(1..=3usize);
    let gts: Vec<(usize, BoundingBox)> = (0..rng.random_range(0..=5usize))
        .map(|_| (rng.random_range(0..frames), random_box(rng)))
        .collect();
    let dets = (0..rng.random_range(0..=8usize))
        .map(|_| {
            // coarse scores so ties occur
            let score = rng.random_range(1..=10u32) as f64 / 10.0;
            if !gts.is_empty() && rng.random_bool(0.7) {
                let (f, g) = gts[rng.random_range(0..gts.len())];
                let j = |rng: &mut ChaCha8Rng| rng.random_range(-6.0..6.0);
                let (l, t) = (g.left() + j(rng), g.top() + j(rng));
                let (r, b) = (
                    (g.right() + j(rng)).max(l + 1.0),
                    (g.bottom() + j(rng)).max(t + 1.0),
                );
                (f, bb(l, t, r, b), score)
            } else {
                (rng.random_range(0..frames), random_box(rng), score)
            }
        })
        .collect();
    Instance { dets, gts }
}

fn to_sets(inst: &Instance) -> (FrameSet, FrameSet) {
    let mut dets = FrameSet::new();
    let mut gts = FrameSet::new();
    for f in 0..3 {
        dets.insert(f.to_string(), FrameAnnotations::new(f.to_string()));
        gts.insert(f.to_string(), FrameAnnotations::new(f.to_string()));
    }
    for (f, b, s) in &inst.dets {
        let d = Detection::new("Pedestrian", *b, *s).unwrap();
        dets.get_mut(&f.to_string()).unwrap().objects.push(d.into());
    }
    for (f, b) in &inst.gts {
        gts.get_mut(&f.to_string())
            .unwrap()
            .objects
            .push(ObjectLabel::new("Pedestrian", *b).into());
    }
    (dets, gts)
}

fn ap_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut defined = 0;
    for n in 0..200 {
        let inst = random_instance(&mut rng);
        let (dets, gts) = to_sets(&inst);
        let curve = pr_curve(
            &dets,
            &gts,
            "Pedestrian",
            0.5,
            CurveMode::ConfidenceSweep,
            &[],
        );
        let got = average_precision(&curve);
        let want = oracle_ap(&inst, 0.5);
        match (got, want) {
            (None, None) => {}
            (Some(a), Some(b)) if (a - b).abs() <= 1e-9 => defined += 1,
            _ => return Err(format!("instance {n}: library {got:?}, oracle {want:?}")),
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "200 instances ({defined} with ground truth) within 1e-9 in {elapsed:.2?}"
    ))
}

// --- IoU ------------------------------------------------------------------

fn pixel_iou(a: [i32; 4], b: [i32; 4]) -> f64 {
    let inside = |r: [i32; 4], x: i32, y: i32| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u32, 0u32);
    for y in 0..32 {
        for x in 0..32 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u32;
            union += (ia || ib) as u32;
        }
    }
    inter as f64 / union as f64
}

fn iou_property_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rand_rect = |rng: &mut ChaCha8Rng| {
        let l = rng.random_range(0..28);
        let t = rng.random_range(0..28);
        [
            l,
            t,
            rng.random_range(l + 1..=32),
            rng.random_range(t + 1..=32),
        ]
    };
    let mut overlapping = 0;
    for n in 0..1000 {
        let (ra, rb) = (rand_rect(&mut rng), rand_rect(&mut rng));
        let to_box = |r: [i32; 4]| bb(r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64);
        let (a, b) = (to_box(ra), to_box(rb));
        let ab = iou(&a, &b);
        ensure(ab == iou(&b, &a), || format!("pair {n}: not symmetric"))?;
        ensure((0.0..=1.0).contains(&ab), || {
            format!("pair {n}: {ab} out of bounds")
        })?;
        ensure(iou(&a, &a) == 1.0, || {
            format!("pair {n}: identity gives {}", iou(&a, &a))
        })?;
        let want = pixel_iou(ra, rb);
        ensure(ab == want, || {
            format!("pair {n} {ra:?} {rb:?}: {ab} vs pixel count {want}")
        })?;
        overlapping += (ab > 0.0) as usize;
    }
    Ok(format!(
        "1000 integer pairs exact ({overlapping} overlapping)"
    ))
}

// --- split / reconstruct ----------------------------------------------------

fn perfect_cascade_min_iou(gt: &FrameSet, with_full: bool) -> Result<(f64, usize), String> {
    let params = CascadeParams::default();
    let mut min_iou = f64::INFINITY;
    let mut hyps_total = 0;
    for (id, frame) in gt {
        let peds: Vec<BoundingBox> = frame
            .labels()
            .iter()
            .filter(|l| l.class_name == "Pedestrian")
            .map(|l| l.bbox)
            .collect();
        let det = |b: BoundingBox, s: f64| Detection::new("Pedestrian", b, s).unwrap();
        let full: Vec<Detection> = if with_full {
            peds.iter().map(|b| det(*b, 0.3)).collect()
        } else {
            vec![]
        };
        let upper: Vec<Detection> = peds
            .iter()
            .map(|b| det(split_box(b, BodyPart::Upper), 0.9))
            .collect();
        let lower: Vec<Detection> = peds
            .iter()
            .map(|b| det(split_box(b, BodyPart::Lower), 0.9))
            .collect();
        let hyps = cascade_decide(&full, &upper, &lower, &params);
        if hyps.len() != peds.len() {
            return Err(format!(
                "frame {id}: {} hypotheses for {} pedestrians",
                hyps.len(),
                peds.len()
            ));
        }
        for h in &hyps {
            let best = peds.iter().map(|p| iou(&h.bbox, p)).fold(0.0, f64::max);
            min_iou = min_iou.min(best);
        }
        for p in &peds {
            let best = hyps.iter().map(|h| iou(&h.bbox, p)).fold(0.0, f64::max);
            min_iou = min_iou.min(best);
        }
        hyps_total += hyps.len();
    }
    Ok((min_iou, hyps_total))
}

fn split_reconstruct_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in 0..1000 {
        // quarter-pixel coordinates keep the area arithmetic exact
        let q =
            |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.random_range(lo * 4..hi * 4) as f64 / 4.0;
        let (l, t) = (q(&mut rng, -50, 1200), q(&mut rng, -50, 370));
        let full = bb(l, t, l + q(&mut rng, 1, 300), t + q(&mut rng, 1, 300));
        let up = split_box(&full, BodyPart::Upper);
        let lo = split_box(&full, BodyPart::Lower);
        ensure(up.area() + lo.area() == full.area(), || {
            format!("box {n} {full}: areas {} + {}", up.area(), lo.area())
        })?;
        ensure(up.intersection_area(&lo) == 0.0, || {
            format!("box {n}: halves overlap")
        })?;
        ensure(reconstruct_full(&up, &lo) == full, || {
            format!("box {n}: reconstruct differs")
        })?;
        // arbitrary floats: reconstruction is still bit-exact
        let (l, t) = (
            rng.random_range(-10.0..1000.0),
            rng.random_range(-10.0..300.0),
        );
        let f = bb(
            l,
            t,
            l + rng.random_range(0.01..300.0),
            t + rng.random_range(0.01..300.0),
        );
        let r = reconstruct_full(
            &split_box(&f, BodyPart::Upper),
            &split_box(&f, BodyPart::Lower),
        );
        ensure(r == f, || format!("box {n} {f}: reconstructed {r}"))?;
    }
    let gt = bundled_labels();
    let (gated, n1) = perfect_cascade_min_iou(&gt, true)?;
    let (halves, n2) = perfect_cascade_min_iou(&gt, false)?;
    let worst = gated.min(halves);
    ensure(worst >= 0.99, || format!("perfect cascade min IoU {worst}"))?;
    Ok(format!(
        "1000 boxes exact; perfect cascade over {} frames, {n1}+{n2} hypotheses, min IoU {worst}",
        gt.len()
    ))
}

// --- occlusion ----------------------------------------------------------------

fn occlusion_pixel_audit() -> Check {
    let gt = bundled_labels();
    let textures = [
        (
            OcclusionKind::Box,
            load_image(&assets().join("textures/box.png")).unwrap(),
        ),
        (
            OcclusionKind::Wall,
            load_image(&assets().join("textures/wall.png")).unwrap(),
        ),
    ];
    let mut painted = 0usize;
    for (id, frame) in gt.iter().take(10) {
        let img = bundled_image(id);
        for (kind, tex) in &textures {
            for filter in [ResizeFilter::Bilinear, ResizeFilter::Nearest] {
                let spec = OverlaySpec::new(*kind, tex.clone())
                    .unwrap()
                    .with_filter(filter);
                let res = occlude_frame(&img, frame, &spec);
                for (x, y, p) in res.image.enumerate_pixels() {
                    let inside = res.regions.iter().any(|r| r.contains(x, y));
                    if inside {
                        painted += 1;
                    } else if p != img.get_pixel(x, y) {
                        return Err(format!(
                            "frame {id} {kind:?}: pixel ({x},{y}) changed outside the regions"
                        ));
                    }
                }
            }
        }
    }
    // nearest-neighbour upscaling by an integer factor replicates texels
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let tex = Image::from_fn(8, 6, |_, _| {
        image::Rgb([rng.random(), rng.random(), rng.random()])
    });
    let canvas = Image::from_pixel(64, 48, image::Rgb([0, 0, 0]));
    for scale in 1..=4u32 {
        let (x0, y0) = (5u32, 3u32);
        let region = bb(
            x0 as f64,
            y0 as f64,
            (x0 + 8 * scale) as f64,
            (y0 + 6 * scale) as f64,
        );
        let (out, warning) = composite(&canvas, &region, &tex, ResizeFilter::Nearest);
        ensure(warning.is_none(), || "unexpected warning".into())?;
        for y in 0..6 * scale {
            for x in 0..8 * scale {
                let want = tex.get_pixel(x / scale, y / scale);
                ensure(out.get_pixel(x0 + x, y0 + y) == want, || {
                    format!("scale {scale}: texel ({x},{y}) differs")
                })?;
            }
        }
    }
    Ok(format!("10 frames x 2 occluders x 2 filters untouched outside regions ({painted} painted px); nearest x1..x4 exact"))
}

// --- grayscale ----------------------------------------------------------------

fn grayscale_invariants() -> Check {
    ensure(luma(image::Rgb([100, 150, 200])) == 141, || {
        format!("luma gave {}", luma(image::Rgb([100, 150, 200])))
    })?;
    let gt = bundled_labels();
    let mut images: Vec<(String, Image)> = gt
        .keys()
        .map(|id| (id.clone(), bundled_image(id)))
        .collect();
    images.push((
        "box texture".into(),
        load_image(&assets().join("textures/box.png")).unwrap(),
    ));
    images.push((
        "wall texture".into(),
        load_image(&assets().join("textures/wall.png")).unwrap(),
    ));
    for (name, img) in &images {
        let gray = to_grayscale(img);
        ensure(gray.pixels().all(|p| p[0] == p[1] && p[1] == p[2]), || {
            format!("{name}: channels differ")
        })?;
        ensure(to_grayscale(&gray) == gray, || {
            format!("{name}: not idempotent")
        })?;
    }
    Ok(format!("{} images; (100,150,200) -> 141", images.len()))
}

// --- statistics ---------------------------------------------------------------

fn statistics_fixture() -> Check {
    let frames: Vec<String> = (0..12).map(|i| format!("{i:06}")).collect();
    let baseline = vec![0.9; 12];
    // one frame lost entirely, one improved, one unchanged, nine degraded
    let variant = vec![
        0.0, 0.85, 0.85, 0.85, 0.85, 0.85, 0.8, 0.8, 0.8, 0.8, 0.95, 0.9,
    ];
    let mut series = ConfidenceSeries::new(frames);
    series
        .push_column("baseline", baseline)
        .map_err(|e| e.to_string())?;
    series
        .push_column("variant", variant)
        .map_err(|e| e.to_string())?;
    let s = diff_stats(&series, "baseline", "variant", 0.5)
        .map_err(|e| e.to_string())?
        .stats;
    // by hand: 0.9 + 5 * 0.05 + 4 * 0.1 - 0.05 + 0 = 1.5
    let mean = 1.5 / 12.0;
    ensure((s.mean_decrease - mean).abs() <= 1e-12, || {
        format!("mean_decrease {} vs {mean}", s.mean_decrease)
    })?;
    ensure((s.frac_lost - 1.0 / 12.0).abs() <= 1e-12, || {
        format!("frac_lost {}", s.frac_lost)
    })?;
    ensure(format!("{:.3}", s.frac_lost) == "0.083", || {
        "frac_lost does not round to 0.083".into()
    })?;
    ensure((s.frac_improved - 1.0 / 12.0).abs() <= 1e-12, || {
        format!("frac_improved {}", s.frac_improved)
    })?;
    ensure((s.frac_unchanged - 1.0 / 12.0).abs() <= 1e-12, || {
        format!("frac_unchanged {}", s.frac_unchanged)
    })?;
    ensure((s.frac_degraded - 9.0 / 12.0).abs() <= 1e-12, || {
        format!("frac_degraded {}", s.frac_degraded)
    })?;
    Ok(format!(
        "frac_lost {:.4}, mean_decrease {:.6}",
        s.frac_lost, s.mean_decrease
    ))
}

// --- end to end ---------------------------------------------------------------

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn end_to_end_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = PipelineConfig {
        dataset_root: assets().join("synthetic"),
        out: tmp.path().join("run"),
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let first = run_pipeline(&config, false).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("pipeline took {elapsed:?}")
    })?;
    let a = snapshot(&config.out);
    run_pipeline(&config, true).map_err(|e| e.to_string())?;
    let b = snapshot(&config.out);
    ensure(a.len() == b.len(), || {
        format!("{} vs {} files", a.len(), b.len())
    })?;
    for (path, bytes) in &a {
        ensure(b.get(path) == Some(bytes), || {
            format!("{} differs between runs", path.display())
        })?;
    }
    for stage in [
        "split.tsv",
        "labels/upper/DERIVED.txt",
        "images/box",
        "eval/original_full.csv",
        "confidence/box.csv",
        "compare/stats.csv",
        "cascade/box/hypotheses.csv",
        "summary.csv",
    ] {
        ensure(config.out.join(stage).exists(), || {
            format!("missing {stage}")
        })?;
    }
    let box_drop = &first
        .comparisons
        .iter()
        .find(|r| r.variant_tag == "box_full")
        .ok_or("no box comparison")?
        .stats;
    let wall_drop = &first
        .comparisons
        .iter()
        .find(|r| r.variant_tag == "wall_full")
        .ok_or("no wall comparison")?
        .stats;
    ensure(
        box_drop.mean_decrease > wall_drop.mean_decrease && wall_drop.mean_decrease > 0.0,
        || {
            format!(
                "box decrease {} vs wall {}",
                box_drop.mean_decrease, wall_drop.mean_decrease
            )
        },
    )?;
    Ok(format!(
        "{} files byte-identical across reruns, first run {elapsed:.2?}",
        a.len()
    ))
}

// --- perfect detector ---------------------------------------------------------

fn perfect_detector_sanity() -> Check {
    let gt = bundled_labels();
    // labels replay as detections with score 1
    let report = evaluate(
        &gt,
        &gt,
        &gt_classes(&gt),
        0.5,
        CurveMode::ConfidenceSweep,
        &[],
    )
    .map_err(|e| e.to_string())?;
    ensure(report.map == Some(1.0), || format!("mAP {:?}", report.map))?;
    for (class, c) in &report.per_class {
        ensure(c.ap == Some(1.0), || format!("{class}: AP {:?}", c.ap))?;
    }
    let series = build_series(&[("full".to_string(), &gt)], &gt, "Pedestrian", 0.5)
        .map_err(|e| e.to_string())?;
    let values = series.get("full").map_err(|e| e.to_string())?;
    ensure(values.iter().all(|v| *v == 1.0), || {
        format!("confidences {values:?}")
    })?;
    Ok(format!(
        "mAP 1.0 over {} classes; {} frame confidences all 1.0",
        report.per_class.len(),
        values.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("AP oracle equivalence", ap_oracle_equivalence),
        ("IoU property suite", iou_property_suite),
        ("split/reconstruct round trip", split_reconstruct_round_trip),
        ("occlusion pixel audit", occlusion_pixel_audit),
        ("grayscale invariants", grayscale_invariants),
        ("statistics fixture", statistics_fixture),
        ("end-to-end determinism", end_to_end_determinism),
        ("perfect-detector sanity", perfect_detector_sanity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
