//! Half-body label variants.
//!
//! The "upper" and "lower" datasets keep every label but cut the target class's
//! box at its vertical midpoint. The midpoint is kept in real coordinates so the
//! two halves partition the original box exactly. Truncation and occlusion flags
//! pass through unchanged.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::kitti_io::{self, FrameAnnotations, FrameSet, PROVENANCE_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BodyPart {
    Full,
    Upper,
    Lower,
}

impl BodyPart {
    pub const ALL: [BodyPart; 3] = [BodyPart::Full, BodyPart::Upper, BodyPart::Lower];

    pub fn as_str(&self) -> &'static str {
        match self {
            BodyPart::Full => "full",
            BodyPart::Upper => "upper",
            BodyPart::Lower => "lower",
        }
    }
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BodyPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(BodyPart::Full),
            "upper" => Ok(BodyPart::Upper),
            "lower" => Ok(BodyPart::Lower),
            other => Err(Error::InvalidParam(format!("unknown body part `{other}`"))),
        }
    }
}

pub fn split_box(bbox: &BoundingBox, part: BodyPart) -> BoundingBox {
    let mid = bbox.top() + bbox.height() / 2.0;
    let (top, bottom) = match part {
        BodyPart::Full => return *bbox,
        BodyPart::Upper => (bbox.top(), mid),
        BodyPart::Lower => (mid, bbox.bottom()),
    };
    // A valid box has top < mid < bottom unless its height underflows.
    BoundingBox::new(bbox.left(), top, bbox.right(), bottom).unwrap_or(*bbox)
}

/// Replace the box of every `target_class` object by its `part` half.
pub fn transform_frame(
    frame: &FrameAnnotations,
    part: BodyPart,
    target_class: &str,
) -> FrameAnnotations {
    let mut out = frame.clone();
    if part == BodyPart::Full {
        return out;
    }
    for object in out.objects.iter_mut() {
        if object.class_name() == target_class {
            let label = object.label_mut();
            label.bbox = split_box(&label.bbox, part);
        }
    }
    out
}

pub fn transform_set(frames: &FrameSet, part: BodyPart, target_class: &str) -> FrameSet {
    frames
        .iter()
        .map(|(id, f)| (id.clone(), transform_frame(f, part, target_class)))
        .collect()
}

/// Contents of a derived directory's provenance file.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub part: BodyPart,
    pub target_class: String,
    pub source: PathBuf,
    pub source_hash: String,
}

impl Provenance {
    pub fn to_text(&self) -> String {
        format!(
            "part={}\nclass={}\nsource={}\nsource_sha256={}\n",
            self.part,
            self.target_class,
            self.source.display(),
            self.source_hash
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut part = None;
        let mut class = None;
        let mut source = None;
        let mut hash = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match line.split_once('=') {
                Some(("part", v)) => part = Some(v.parse()?),
                Some(("class", v)) => class = Some(v.to_string()),
                Some(("source", v)) => source = Some(PathBuf::from(v)),
                Some(("source_sha256", v)) => hash = Some(v.to_string()),
                _ => return Err(Error::Config(format!("bad provenance line `{line}`"))),
            }
        }
        match (part, class, source, hash) {
            (Some(part), Some(target_class), Some(source), Some(source_hash)) => Ok(Self {
                part,
                target_class,
                source,
                source_hash,
            }),
            _ => Err(Error::Config("incomplete provenance file".into())),
        }
    }

    /// Provenance of `dir`, if it is a derived label directory.
    pub fn read(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(PROVENANCE_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_text(&text)
            .map(Some)
            .map_err(|e| Error::in_file(path, e))
    }
}

/// SHA-256 over the sorted frame files of a label directory (names and bytes).
pub fn hash_label_dir(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for path in kitti_io::frame_files(dir)? {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        hasher.update(name.as_bytes());
        hasher.update([0]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterializeReport {
    pub frames: usize,
    pub transformed_objects: usize,
    pub warnings: Vec<String>,
}

/// Write the `part` variant of the label directory `input` into `output`,
/// together with a provenance file.
///
/// Refuses a non-empty `output` unless `force`, and refuses a source that is
/// itself a halved derivative.
pub fn materialize(
    input: &Path,
    output: &Path,
    part: BodyPart,
    target_class: &str,
    force: bool,
) -> Result<MaterializeReport> {
    if let Some(prov) = Provenance::read(input)? {
        if prov.part != BodyPart::Full && part != BodyPart::Full {
            return Err(Error::Pipeline(format!(
                "{} is already a derived `{}` dataset; halving it again is not supported",
                input.display(),
                prov.part
            )));
        }
    }
    if output.exists() {
        let non_empty = fs::read_dir(output)
            .map_err(|e| Error::io(output, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::Pipeline(format!(
                "output directory {} is not empty (use --force)",
                output.display()
            )));
        }
        if non_empty {
            for path in kitti_io::frame_files(output)? {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }

    let frames = kitti_io::read_dir(input)?;
    let derived = transform_set(&frames, part, target_class);
    kitti_io::write_dir(&derived, output)?;

    let provenance = Provenance {
        part,
        target_class: target_class.to_string(),
        source: input.to_path_buf(),
        source_hash: hash_label_dir(input)?,
    };
    let prov_path = output.join(PROVENANCE_FILE);
    fs::write(&prov_path, provenance.to_text()).map_err(|e| Error::io(&prov_path, e))?;

    let mut report = MaterializeReport {
        frames: frames.len(),
        transformed_objects: if part == BodyPart::Full {
            0
        } else {
            frames.values().map(|f| f.count_class(target_class)).sum()
        },
        warnings: Vec::new(),
    };
    if frames.is_empty() {
        let msg = format!("no label files in {}", input.display());
        log::warn!("{msg}");
        report.warnings.push(msg);
    }
    Ok(report)
}
