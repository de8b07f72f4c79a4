//! Deterministic synthetic street scenes and a simulated detector.
//!
//! Scenes are flat-shaded: pedestrians are drawn as head, shirt and trouser
//! bands filling their label box exactly, cars as gray blocks. The simulated
//! detector scores a pedestrian by how much of its expected body-colored area
//! is still visible in the image, so occluders and grayscale conversion lower
//! its confidence the way they would for a learned model, only far more
//! predictably.

use std::collections::BTreeMap;

use image::Rgb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::bbox::BoundingBox;
use crate::error::Result;
use crate::kitti_io::{Annotation, Detection, FrameAnnotations, FrameSet, ObjectLabel, DONT_CARE};
use crate::label_transform::{split_box, BodyPart};
use crate::occlusion_synth::{luma, round_region, Image};

pub const SCENE_WIDTH: u32 = 320;
pub const SCENE_HEIGHT: u32 = 120;

const SKIN: [u8; 3] = [224, 172, 105];
const SHIRTS: [[u8; 3]; 3] = [[40, 90, 200], [200, 40, 60], [40, 160, 80]];
const TROUSERS: [u8; 3] = [70, 50, 120];
const CAR: [u8; 3] = [150, 150, 160];
const CAR_WINDOW: [u8; 3] = [30, 40, 50];

/// Fraction of the box height taken by the head band, then the shirt band.
const HEAD_END: f64 = 0.18;
const SHIRT_END: f64 = 0.5;

/// Palette distance (L1 over channels) under which a pixel counts as body-colored.
const PALETTE_TOLERANCE: u32 = 24;
const GRAY_LUMA_TOLERANCE: i32 = 3;
/// Gray body pixels count for less than colored ones.
const GRAY_CREDIT: f64 = 0.7;

/// Visual weight of each band; faces carry the most evidence.
const HEAD_WEIGHT: f64 = 3.0;
const SHIRT_WEIGHT: f64 = 1.5;
const TROUSER_WEIGHT: f64 = 1.0;

/// Stable per-item seed, independent of iteration order.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn fill(img: &mut Image, left: f64, top: f64, right: f64, bottom: f64, color: [u8; 3]) {
    let Ok(b) = BoundingBox::new(left, top, right, bottom) else {
        return;
    };
    let (w, h) = img.dimensions();
    let x0 = b.left().round().clamp(0.0, w as f64) as u32;
    let x1 = b.right().round().clamp(0.0, w as f64) as u32;
    let y0 = b.top().round().clamp(0.0, h as f64) as u32;
    let y1 = b.bottom().round().clamp(0.0, h as f64) as u32;
    for y in y0..y1 {
        for x in x0..x1 {
            img.put_pixel(x, y, Rgb(color));
        }
    }
}

fn background(width: u32, height: u32) -> Image {
    let horizon = height * 2 / 5;
    Image::from_fn(width, height, |x, y| {
        if y < horizon {
            let t = y as f64 / horizon as f64;
            Rgb([
                (150.0 + 40.0 * t) as u8,
                (185.0 + 20.0 * t) as u8,
                (225.0 - 10.0 * t) as u8,
            ])
        } else {
            // asphalt with faint lane streaks
            let streak = if (x / 16 + y / 4) % 7 == 0 { 12 } else { 0 };
            let v = 96 + streak;
            Rgb([v as u8, v as u8, (v + 4) as u8])
        }
    })
}

/// Paint a pedestrian into its label box.
pub fn draw_pedestrian(img: &mut Image, bbox: &BoundingBox, shirt: usize) {
    let h = bbox.height();
    let (l, t, r) = (bbox.left(), bbox.top(), bbox.right());
    fill(img, l, t, r, t + HEAD_END * h, SKIN);
    fill(
        img,
        l,
        t + HEAD_END * h,
        r,
        t + SHIRT_END * h,
        SHIRTS[shirt % SHIRTS.len()],
    );
    fill(img, l, t + SHIRT_END * h, r, bbox.bottom(), TROUSERS);
}

fn draw_car(img: &mut Image, bbox: &BoundingBox) {
    fill(
        img,
        bbox.left(),
        bbox.top(),
        bbox.right(),
        bbox.bottom(),
        CAR,
    );
    let h = bbox.height();
    let w = bbox.width();
    fill(
        img,
        bbox.left() + 0.15 * w,
        bbox.top() + 0.1 * h,
        bbox.right() - 0.15 * w,
        bbox.top() + 0.45 * h,
        CAR_WINDOW,
    );
}

fn label(class_name: &str, bbox: BoundingBox, image_width: f64) -> ObjectLabel {
    let mut l = ObjectLabel::new(class_name, bbox);
    let visible = bbox.right().min(image_width) - bbox.left().max(0.0);
    l.truncated = (1.0 - visible / bbox.width()).clamp(0.0, 1.0);
    let (dims, depth_scale) = if class_name == "Car" {
        ([1.5, 1.6, 3.9], 60.0)
    } else {
        ([1.75, 0.6, 0.8], 12.0)
    };
    l.dimensions = dims;
    // rough pinhole placement so the 3D fields look plausible; never interpreted
    let z = ((depth_scale * 50.0 / bbox.height()) * 100.0).round() / 100.0;
    let x = (((bbox.center_x() - image_width / 2.0) / 50.0) * 100.0).round() / 100.0;
    l.location = [x, 1.65, z];
    l
}

fn quarter(v: f64) -> f64 {
    (v * 4.0).round() / 4.0
}

/// One synthetic frame: image plus labels.
pub struct SyntheticFrame {
    pub image: Image,
    pub labels: FrameAnnotations,
}

/// Deterministic scene `index` of a dataset generated with `seed`.
///
/// Every fifth frame has no pedestrians; frame 1 has a pedestrian truncated at
/// the left border; frame 2 has two overlapping pedestrians.
pub fn synthetic_frame(index: usize, seed: u64) -> SyntheticFrame {
    let frame_id = format!("{index:06}");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["frame", &frame_id]));
    let (w, h) = (SCENE_WIDTH, SCENE_HEIGHT);
    let mut img = background(w, h);
    let mut labels = FrameAnnotations::new(frame_id);
    labels.image_size = Some((w, h));
    let wf = w as f64;

    let mut objects = Vec::new();
    if rng.random_bool(0.6) || index % 5 == 4 {
        let cw = rng.random_range(50.0..80.0);
        let ch = cw * 0.45;
        let left = quarter(rng.random_range(0.0..wf - cw));
        let bottom = quarter(rng.random_range(90.0..118.0));
        let b = BoundingBox::new(left, quarter(bottom - ch), quarter(left + cw), bottom)
            .expect("positive size");
        objects.push(("Car", b));
    }
    if index % 5 != 4 {
        let count = rng.random_range(1..=3usize);
        let slot = wf / count as f64;
        for k in 0..count {
            let ph = rng.random_range(34.0..90.0);
            let pw = ph * 0.4;
            let mut left = slot * k as f64 + rng.random_range(0.0..(slot - pw).max(1.0));
            if index == 1 && k == 0 {
                left = -pw * 0.35;
            }
            if index == 2 && k == 1 {
                // overlap the previous pedestrian
                let (_, prev) = objects.last().expect("previous pedestrian");
                let prev: &BoundingBox = prev;
                left = prev.left() + prev.width() * 0.5;
            }
            let bottom = rng.random_range((ph + 8.0).min(118.0)..119.0);
            let b = BoundingBox::new(
                quarter(left),
                quarter(bottom - ph),
                quarter(left + pw),
                quarter(bottom),
            )
            .expect("positive size");
            objects.push(("Pedestrian", b));
        }
    }

    for (class, b) in &objects {
        match *class {
            "Car" => draw_car(&mut img, b),
            _ => draw_pedestrian(&mut img, b, rng.random_range(0..SHIRTS.len())),
        }
        labels.objects.push(Annotation::Label(label(class, *b, wf)));
    }
    if index == 3 {
        let dc = BoundingBox::new(290.0, 44.0, 310.0, 60.0).expect("fixed box");
        let mut l = ObjectLabel::new(DONT_CARE, dc);
        l.truncated = -1.0;
        l.occluded = -1;
        l.alpha = -10.0;
        l.dimensions = [-1.0; 3];
        l.location = [-1000.0; 3];
        l.rotation_y = -10.0;
        labels.objects.push(Annotation::Label(l));
    }
    SyntheticFrame { image: img, labels }
}

pub fn synthetic_dataset(frames: usize, seed: u64) -> Vec<SyntheticFrame> {
    (0..frames).map(|i| synthetic_frame(i, seed)).collect()
}

/// Cardboard-box occluder texture.
pub fn box_texture() -> Image {
    Image::from_fn(32, 32, |x, y| {
        if x < 2 || y < 2 || x > 29 || y > 29 {
            Rgb([100, 72, 40])
        } else if (14..18).contains(&y) {
            Rgb([135, 96, 56])
        } else {
            Rgb([181, 137, 87])
        }
    })
}

/// Brick-wall occluder texture.
pub fn wall_texture() -> Image {
    Image::from_fn(48, 24, |x, y| {
        let row = y / 6;
        let offset = if row % 2 == 0 { 0 } else { 6 };
        if y % 6 == 5 || (x + offset) % 12 == 11 {
            Rgb([200, 190, 180])
        } else {
            Rgb([150, 45, 30])
        }
    })
}

fn body_palette() -> impl Iterator<Item = &'static [u8; 3]> {
    [&SKIN, &TROUSERS].into_iter().chain(SHIRTS.iter())
}

fn palette_match(p: &Rgb<u8>) -> bool {
    let near = |c: &[u8; 3]| {
        p.0.iter()
            .zip(c)
            .map(|(a, b)| (*a as i32 - *b as i32).unsigned_abs())
            .sum::<u32>()
            <= PALETTE_TOLERANCE
    };
    body_palette().any(near)
}

/// A neutral pixel whose luma matches a body color: the shape survived
/// graying but the color did not.
fn gray_match(p: &Rgb<u8>) -> bool {
    let [r, g, b] = p.0;
    if r != g || g != b {
        return false;
    }
    body_palette().any(|c| (luma(Rgb(*c)) as i32 - r as i32).abs() <= GRAY_LUMA_TOLERANCE)
}

/// Evidence credit of one pixel.
fn pixel_credit(p: &Rgb<u8>) -> f64 {
    if palette_match(p) {
        1.0
    } else if gray_match(p) {
        GRAY_CREDIT
    } else {
        0.0
    }
}

fn band_weight(relative_y: f64) -> f64 {
    if relative_y < HEAD_END {
        HEAD_WEIGHT
    } else if relative_y < SHIRT_END {
        SHIRT_WEIGHT
    } else {
        TROUSER_WEIGHT
    }
}

/// Weighted fraction of `region` pixels that still look like body parts of
/// the pedestrian labeled `person`.
pub fn visible_evidence(image: &Image, person: &BoundingBox, region: &BoundingBox) -> f64 {
    let Some(rect) = round_region(region, image.dimensions()) else {
        return 0.0;
    };
    let (mut seen, mut total) = (0.0, 0.0);
    for y in rect.y0..rect.y1 {
        let rel = ((y as f64 + 0.5) - person.top()) / person.height();
        let w = band_weight(rel.clamp(0.0, 1.0));
        for x in rect.x0..rect.x1 {
            total += w;
            seen += w * pixel_credit(image.get_pixel(x, y));
        }
    }
    if total == 0.0 {
        0.0
    } else {
        seen / total
    }
}

/// Noise-perturbed ground-truth "detector" for one body-part model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDetector {
    pub part: BodyPart,
    pub seed: u64,
    /// Maximum edge displacement, as a fraction of the box size.
    pub box_jitter: f64,
    /// Peak score is drawn from `[1 - score_noise, 1)` before scaling by evidence.
    pub score_noise: f64,
    /// Probability of one spurious low-score detection per frame.
    pub false_positive_rate: f64,
    /// Detections scoring below this are dropped.
    pub min_score: f64,
    pub class_name: String,
}

impl SimulatedDetector {
    pub fn new(part: BodyPart, seed: u64) -> Self {
        Self {
            part,
            seed,
            box_jitter: 0.04,
            score_noise: 0.12,
            false_positive_rate: 0.15,
            min_score: 0.05,
            class_name: "Pedestrian".to_string(),
        }
    }

    /// Detections for one frame. Deterministic in `(seed, part, frame_id)`.
    pub fn detect(&self, image: &Image, labels: &FrameAnnotations) -> FrameAnnotations {
        let (w, h) = image.dimensions();
        let mut out = FrameAnnotations::new(labels.frame_id.clone());
        out.image_size = Some((w, h));
        let part = self.part.as_str();
        for (i, obj) in labels.objects.iter().enumerate() {
            if obj.class_name() != self.class_name {
                continue;
            }
            let idx = i.to_string();
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[part, &labels.frame_id, &idx]));
            let Some(region) = split_box(obj.bbox(), self.part).clip(w as f64, h as f64) else {
                continue;
            };
            let evidence = visible_evidence(image, obj.bbox(), &region);
            let peak = 1.0 - self.score_noise * rng.random::<f64>();
            let score = round_score(peak * evidence);
            let bbox = jitter(&region, self.box_jitter, &mut rng, (w, h)).unwrap_or(region);
            if score >= self.min_score {
                let det =
                    Detection::new(self.class_name.clone(), bbox, score).expect("score in [0, 1]");
                out.objects.push(Annotation::Detection(det));
            }
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[part, &labels.frame_id, "fp"]));
        if rng.random_bool(self.false_positive_rate) {
            let bh = rng.random_range(10.0..30.0);
            let bw = bh * 0.5;
            let left = rng.random_range(0.0..w as f64 - bw);
            let top = rng.random_range(0.0..h as f64 - bh);
            let score = round_score(rng.random_range(0.06..0.4));
            if let Ok(b) = BoundingBox::new(left, top, left + bw, top + bh) {
                let det = Detection::new(self.class_name.clone(), round_box(&b), score)
                    .expect("score in [0, 1]");
                out.objects.push(Annotation::Detection(det));
            }
        }
        out
    }
}

/// Scores with four decimals, as detector exports usually carry.
fn round_score(v: f64) -> f64 {
    ((v * 10_000.0).round() / 10_000.0).clamp(0.0, 1.0)
}

fn round_box(b: &BoundingBox) -> BoundingBox {
    let r = |v: f64| (v * 100.0).round() / 100.0;
    BoundingBox::new(r(b.left()), r(b.top()), r(b.right()), r(b.bottom())).unwrap_or(*b)
}

fn jitter(
    b: &BoundingBox,
    amount: f64,
    rng: &mut ChaCha8Rng,
    (w, h): (u32, u32),
) -> Option<BoundingBox> {
    let mut d = || amount * (2.0 * rng.random::<f64>() - 1.0);
    let (bw, bh) = (b.width(), b.height());
    let moved = BoundingBox::new(
        b.left() + d() * bw,
        b.top() + d() * bh,
        b.right() + d() * bw,
        b.bottom() + d() * bh,
    )
    .ok()?
    .clip(w as f64, h as f64)?;
    Some(round_box(&moved))
}

/// Run a simulated detector over every frame that has an image.
pub fn simulate_set(
    detector: &SimulatedDetector,
    images: &BTreeMap<String, Image>,
    labels: &FrameSet,
) -> Result<FrameSet> {
    Ok(labels
        .iter()
        .filter_map(|(id, f)| {
            images
                .get(id)
                .map(|img| (id.clone(), detector.detect(img, f)))
        })
        .collect())
}
