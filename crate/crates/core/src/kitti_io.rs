//! KITTI 2D-object label files, score-bearing detection files, and split manifests.
//!
//! A label line has 15 whitespace-separated fields:
//!
//! ```text
//! type truncated occluded alpha left top right bottom h w l x y z rotation_y
//! ```
//!
//! A detection line appends a 16th field, the confidence score. One file per
//! frame, the frame id being the file stem.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use crate::bbox::BoundingBox;
use crate::error::{Error, Result};

/// File name reserved for provenance records inside label directories.
pub const PROVENANCE_FILE: &str = "DERIVED.txt";

/// KITTI marks ignored regions with this class; they never count as objects.
pub const DONT_CARE: &str = "DontCare";

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLabel {
    pub class_name: String,
    /// Fraction in `[0, 1]`, or `-1` for the devkit's "unknown" sentinel.
    pub truncated: f64,
    /// 0 visible, 1 partly, 2 largely occluded, 3 unknown; `-1` for don't-care rows.
    pub occluded: i32,
    pub alpha: f64,
    pub bbox: BoundingBox,
    /// `(height, width, length)` in meters; preserved, never interpreted.
    pub dimensions: [f64; 3],
    /// `(x, y, z)` in camera coordinates; preserved, never interpreted.
    pub location: [f64; 3],
    pub rotation_y: f64,
}

impl ObjectLabel {
    /// A label with only class and box set; the remaining fields are zero.
    pub fn new(class_name: impl Into<String>, bbox: BoundingBox) -> Self {
        Self {
            class_name: class_name.into(),
            truncated: 0.0,
            occluded: 0,
            alpha: 0.0,
            bbox,
            dimensions: [0.0; 3],
            location: [0.0; 3],
            rotation_y: 0.0,
        }
    }
}

/// A detector output: a full KITTI record plus a confidence score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: ObjectLabel,
    pub score: f64,
}

impl Detection {
    pub fn new(class_name: impl Into<String>, bbox: BoundingBox, score: f64) -> Result<Self> {
        Self::from_label(ObjectLabel::new(class_name, bbox), score)
    }

    pub fn from_label(label: ObjectLabel, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidParam(format!(
                "detection score {score} outside [0, 1]"
            )));
        }
        Ok(Self { label, score })
    }

    pub fn class_name(&self) -> &str {
        &self.label.class_name
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.label.bbox
    }
}

/// One line of a frame file.
#[derive(Debug, Clone, PartialEq)]
pub enum Annotation {
    Label(ObjectLabel),
    Detection(Detection),
}

impl Annotation {
    pub fn label(&self) -> &ObjectLabel {
        match self {
            Annotation::Label(l) => l,
            Annotation::Detection(d) => &d.label,
        }
    }

    pub fn label_mut(&mut self) -> &mut ObjectLabel {
        match self {
            Annotation::Label(l) => l,
            Annotation::Detection(d) => &mut d.label,
        }
    }

    pub fn class_name(&self) -> &str {
        &self.label().class_name
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.label().bbox
    }

    pub fn score(&self) -> Option<f64> {
        match self {
            Annotation::Label(_) => None,
            Annotation::Detection(d) => Some(d.score),
        }
    }
}

impl From<ObjectLabel> for Annotation {
    fn from(label: ObjectLabel) -> Self {
        Annotation::Label(label)
    }
}

impl From<Detection> for Annotation {
    fn from(detection: Detection) -> Self {
        Annotation::Detection(detection)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotations {
    pub frame_id: String,
    /// `(width, height)` in pixels when known; label files do not carry it.
    pub image_size: Option<(u32, u32)>,
    pub objects: Vec<Annotation>,
}

impl FrameAnnotations {
    pub fn new(frame_id: impl Into<String>) -> Self {
        Self {
            frame_id: frame_id.into(),
            image_size: None,
            objects: Vec::new(),
        }
    }

    /// Ground-truth view: every object as a label (detection scores dropped).
    pub fn labels(&self) -> Vec<ObjectLabel> {
        self.objects.iter().map(|o| o.label().clone()).collect()
    }

    /// Detection view: label rows are replayed as detections with score 1.
    pub fn detections(&self) -> Vec<Detection> {
        self.objects
            .iter()
            .map(|o| match o {
                Annotation::Label(l) => Detection {
                    label: l.clone(),
                    score: 1.0,
                },
                Annotation::Detection(d) => d.clone(),
            })
            .collect()
    }

    pub fn count_class(&self, class_name: &str) -> usize {
        self.objects
            .iter()
            .filter(|o| o.class_name() == class_name)
            .count()
    }

    /// Indices of objects lying more than `tolerance` pixels outside the image.
    /// Empty when the image size is unknown.
    pub fn out_of_bounds(&self, tolerance: f64) -> Vec<usize> {
        let Some((w, h)) = self.image_size else {
            return Vec::new();
        };
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.bbox().exceeds(w as f64, h as f64, tolerance))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Frames keyed by frame id, iterated in lexicographic order.
pub type FrameSet = BTreeMap<String, FrameAnnotations>;

fn parse_f64(token: &str, line: usize, field: &'static str) -> Result<f64> {
    match f64::from_str(token) {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            field,
            value: token.to_string(),
        }),
    }
}

/// Parse one line of a label (15 fields) or detection (16 fields) file.
///
/// `line_no` is only used to label errors.
pub fn parse_label_line(line: &str, line_no: usize) -> Result<Annotation> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(Error::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }
    let num = |i: usize, name: &'static str| parse_f64(fields[i], line_no, name);

    let truncated = num(1, "truncated")?;
    if !((0.0..=1.0).contains(&truncated) || truncated == -1.0) {
        return Err(Error::Parse {
            line: line_no,
            field: "truncated",
            value: fields[1].to_string(),
        });
    }
    let occluded = match i32::from_str(fields[2]) {
        Ok(v) if (-1..=3).contains(&v) => v,
        _ => {
            return Err(Error::Parse {
                line: line_no,
                field: "occluded",
                value: fields[2].to_string(),
            })
        }
    };
    let bbox = BoundingBox::new(
        num(4, "left")?,
        num(5, "top")?,
        num(6, "right")?,
        num(7, "bottom")?,
    )
    .map_err(|e| Error::Line {
        line: line_no,
        source: Box::new(e),
    })?;

    let label = ObjectLabel {
        class_name: fields[0].to_string(),
        truncated,
        occluded,
        alpha: num(3, "alpha")?,
        bbox,
        dimensions: [num(8, "height")?, num(9, "width")?, num(10, "length")?],
        location: [num(11, "x")?, num(12, "y")?, num(13, "z")?],
        rotation_y: num(14, "rotation_y")?,
    };

    if fields.len() == 16 {
        let score = num(15, "score")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Parse {
                line: line_no,
                field: "score",
                value: fields[15].to_string(),
            });
        }
        Ok(Annotation::Detection(Detection { label, score }))
    } else {
        Ok(Annotation::Label(label))
    }
}

/// Shortest round-trip decimal with at least two fractional digits.
pub(crate) fn fmt_num(v: f64) -> String {
    let mut s = format!("{v}");
    match s.find('.') {
        None => s.push_str(".00"),
        Some(dot) if s.len() - dot == 2 => s.push('0'),
        Some(_) => {}
    }
    s
}

/// Serialize one record in the 15/16-field layout (no trailing newline).
pub fn format_annotation(annotation: &Annotation) -> String {
    let l = annotation.label();
    let mut out = String::with_capacity(96);
    out.push_str(&l.class_name);
    let _ = write!(out, " {} {}", fmt_num(l.truncated), l.occluded);
    for v in [
        l.alpha,
        l.bbox.left(),
        l.bbox.top(),
        l.bbox.right(),
        l.bbox.bottom(),
        l.dimensions[0],
        l.dimensions[1],
        l.dimensions[2],
        l.location[0],
        l.location[1],
        l.location[2],
        l.rotation_y,
    ] {
        out.push(' ');
        out.push_str(&fmt_num(v));
    }
    if let Some(score) = annotation.score() {
        out.push(' ');
        out.push_str(&fmt_num(score));
    }
    out
}

/// Parse a whole frame file body. Blank lines are skipped.
pub fn parse_frame(frame_id: impl Into<String>, text: &str) -> Result<FrameAnnotations> {
    let mut frame = FrameAnnotations::new(frame_id);
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        frame.objects.push(parse_label_line(line, i + 1)?);
    }
    Ok(frame)
}

pub fn format_frame(frame: &FrameAnnotations) -> String {
    let mut out = String::new();
    for o in &frame.objects {
        out.push_str(&format_annotation(o));
        out.push('\n');
    }
    out
}

pub fn read_frame(path: &Path) -> Result<FrameAnnotations> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let frame_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_frame(frame_id, &text).map_err(|e| Error::in_file(path, e))
}

pub fn write_frame(frame: &FrameAnnotations, path: &Path) -> Result<()> {
    fs::write(path, format_frame(frame)).map_err(|e| Error::io(path, e))
}

/// Paths of all frame files (`*.txt`, provenance file excluded) in `dir`, sorted.
pub fn frame_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_txt = path.extension().is_some_and(|e| e == "txt");
        let is_provenance = path.file_name().is_some_and(|n| n == PROVENANCE_FILE);
        if path.is_file() && is_txt && !is_provenance {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Read every frame file in a directory.
pub fn read_dir(dir: &Path) -> Result<FrameSet> {
    let mut set = FrameSet::new();
    for path in frame_files(dir)? {
        let frame = read_frame(&path)?;
        set.insert(frame.frame_id.clone(), frame);
    }
    Ok(set)
}

/// Write one `<frame_id>.txt` per frame; the directory is created if needed.
pub fn write_dir(frames: &FrameSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for frame in frames.values() {
        write_frame(frame, &dir.join(format!("{}.txt", frame.frame_id)))?;
    }
    Ok(())
}

/// Frames whose non-`DontCare` objects are all of `class_name` (and there is at least one).
pub fn class_only_frames(frames: &FrameSet, class_name: &str) -> BTreeSet<String> {
    frames
        .values()
        .filter(|f| {
            let mut relevant = f.objects.iter().filter(|o| o.class_name() != DONT_CARE);
            let mut any = false;
            let all = relevant.all(|o| {
                any = true;
                o.class_name() == class_name
            });
            any && all
        })
        .map(|f| f.frame_id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Train,
    Test,
    Validation,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Train, Bucket::Test, Bucket::Validation];

    pub fn as_str(&self) -> &'static str {
        match self {
            Bucket::Train => "train",
            Bucket::Test => "test",
            Bucket::Validation => "validation",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Bucket::Train),
            "test" => Ok(Bucket::Test),
            "validation" => Ok(Bucket::Validation),
            other => Err(Error::Split(format!("unknown bucket `{other}`"))),
        }
    }
}

/// Train/test/validation fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl SplitRatios {
    pub fn new(train: f64, test: f64, validation: f64) -> Result<Self> {
        let parts = [train, test, validation];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Split(format!(
                "ratios must be non-negative: {train},{test},{validation}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(Self {
            train,
            test,
            validation,
        })
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    /// `"0.4,0.4,0.2"`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Split(format!("bad ratio `{p}`")))
            })
            .collect::<Result<_>>()?;
        match parts.as_slice() {
            [a, b, c] => SplitRatios::new(*a, *b, *c),
            _ => Err(Error::Split(format!("expected three ratios, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub assignment: BTreeMap<String, Bucket>,
    /// Per-frame "contains only the target class" flag; see [`class_only_frames`].
    /// Kept in memory only, the manifest file carries the assignment.
    pub pedestrian_only: BTreeMap<String, bool>,
}

impl SplitManifest {
    pub fn bucket(&self, bucket: Bucket) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, b)| **b == bucket)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sizes(&self) -> [usize; 3] {
        Bucket::ALL.map(|b| self.assignment.values().filter(|v| **v == b).count())
    }

    pub fn flag_class_only(&mut self, frames: &FrameSet, class_name: &str) {
        let only = class_only_frames(frames, class_name);
        for id in self.assignment.keys() {
            self.pedestrian_only
                .insert(id.clone(), only.contains(id.as_str()));
        }
    }

    /// `# seed=<n> ratios=<a>,<b>,<c>` then `frame_id<TAB>bucket` per frame, sorted by id.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# seed={} ratios={},{},{}\n",
            self.seed, self.ratios.train, self.ratios.test, self.ratios.validation
        );
        for (id, bucket) in &self.assignment {
            let _ = writeln!(out, "{id}\t{bucket}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|h| h.strip_prefix("# "))
            .ok_or_else(|| Error::Split("missing manifest header".into()))?;
        let mut seed = None;
        let mut ratios = None;
        for kv in header.split_whitespace() {
            match kv.split_once('=') {
                Some(("seed", v)) => {
                    seed = Some(
                        v.parse::<u64>()
                            .map_err(|_| Error::Split(format!("bad seed `{v}`")))?,
                    )
                }
                Some(("ratios", v)) => ratios = Some(v.parse::<SplitRatios>()?),
                _ => return Err(Error::Split(format!("bad header item `{kv}`"))),
            }
        }
        let (Some(seed), Some(ratios)) = (seed, ratios) else {
            return Err(Error::Split("header needs seed and ratios".into()));
        };
        let mut assignment = BTreeMap::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (id, bucket) = line
                .split_once('\t')
                .ok_or_else(|| Error::Split(format!("bad manifest line `{line}`")))?;
            if assignment.insert(id.to_string(), bucket.parse()?).is_some() {
                return Err(Error::Split(format!("duplicate frame id `{id}`")));
            }
        }
        Ok(Self {
            seed,
            ratios,
            assignment,
            pedestrian_only: BTreeMap::new(),
        })
    }
}

/// Fisher-Yates shuffle driven by ChaCha8 (`rand_chacha`, `seed_from_u64`).
///
/// For `i` from `n-1` down to 1 the swap partner is
/// `j = (next_u64() * (i + 1)) >> 64`, computed in 128-bit arithmetic.
fn shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        items.swap(i, j);
    }
}

/// Deterministic train/test/validation split.
///
/// Ids are sorted, shuffled with [`shuffle`], then cut: `floor(n * train)`
/// to train, `floor(n * test)` to test, the remainder to validation.
pub fn make_split(frame_ids: &[String], ratios: SplitRatios, seed: u64) -> Result<SplitManifest> {
    if frame_ids.is_empty() {
        return Err(Error::Split("no frame ids".into()));
    }
    let mut ids: Vec<&String> = frame_ids.iter().collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Split(format!("duplicate frame id `{}`", w[0])));
    }
    shuffle(&mut ids, seed);

    let n = ids.len();
    // The epsilon absorbs products such as 0.29 * 100 = 28.999999999999996.
    let cut = |r: f64| ((n as f64 * r + 1e-9).floor() as usize).min(n);
    let n_train = cut(ratios.train);
    let n_test = cut(ratios.test).min(n - n_train);

    let assignment = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let bucket = if i < n_train {
                Bucket::Train
            } else if i < n_train + n_test {
                Bucket::Test
            } else {
                Bucket::Validation
            };
            (id.clone(), bucket)
        })
        .collect();

    Ok(SplitManifest {
        seed,
        ratios,
        assignment,
        pedestrian_only: BTreeMap::new(),
    })
}
