//! Synthetic occluders and grayscale conversion.
//!
//! An occluder texture is resampled to a region derived from each target
//! object's label box and pasted opaquely. Box occlusion covers the upper
//! half of the box, wall occlusion the lower half. The box size stands in for
//! distance, so nearer pedestrians get proportionally larger occluders.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::kitti_io::FrameAnnotations;
use crate::label_transform::{split_box, BodyPart};

/// 8-bit RGB raster, row-major.
pub type Image = RgbImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionKind {
    /// A carried box hiding head and shoulders.
    Box,
    /// A wall hiding the body from the waist down.
    Wall,
}

impl OcclusionKind {
    pub fn region(&self) -> BodyPart {
        match self {
            OcclusionKind::Box => BodyPart::Upper,
            OcclusionKind::Wall => BodyPart::Lower,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            OcclusionKind::Box => "box",
            OcclusionKind::Wall => "wall",
        }
    }
}

impl fmt::Display for OcclusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OcclusionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(OcclusionKind::Box),
            "wall" => Ok(OcclusionKind::Wall),
            other => Err(Error::InvalidParam(format!(
                "unknown occlusion kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResizeFilter {
    Nearest,
    #[default]
    Bilinear,
}

impl ResizeFilter {
    fn filter_type(self) -> FilterType {
        match self {
            ResizeFilter::Nearest => FilterType::Nearest,
            ResizeFilter::Bilinear => FilterType::Triangle,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ResizeFilter::Nearest => "nearest",
            ResizeFilter::Bilinear => "bilinear",
        }
    }
}

impl FromStr for ResizeFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(ResizeFilter::Nearest),
            "bilinear" => Ok(ResizeFilter::Bilinear),
            other => Err(Error::InvalidParam(format!(
                "unknown resize filter `{other}`"
            ))),
        }
    }
}

/// Recipe for one occlusion experiment.
#[derive(Debug, Clone)]
pub struct OverlaySpec {
    pub kind: OcclusionKind,
    pub texture: Image,
    pub region: BodyPart,
    /// Occluder width relative to the label box width.
    pub width_factor: f64,
    pub resize_filter: ResizeFilter,
    pub target_class: String,
}

impl OverlaySpec {
    pub fn new(kind: OcclusionKind, texture: Image) -> Result<Self> {
        Self {
            kind,
            texture,
            region: kind.region(),
            width_factor: 1.0,
            resize_filter: ResizeFilter::default(),
            target_class: "Pedestrian".to_string(),
        }
        .validated()
    }

    pub fn with_width_factor(mut self, width_factor: f64) -> Result<Self> {
        self.width_factor = width_factor;
        self.validated()
    }

    pub fn with_filter(mut self, filter: ResizeFilter) -> Self {
        self.resize_filter = filter;
        self
    }

    pub fn with_target_class(mut self, class_name: impl Into<String>) -> Self {
        self.target_class = class_name.into();
        self
    }

    fn validated(self) -> Result<Self> {
        if self.texture.width() == 0 || self.texture.height() == 0 {
            return Err(Error::InvalidParam("occluder texture is empty".into()));
        }
        if !(self.width_factor.is_finite() && self.width_factor > 0.0) {
            return Err(Error::InvalidParam(format!(
                "width factor must be > 0, got {}",
                self.width_factor
            )));
        }
        Ok(self)
    }
}

/// Integer pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// Region an occluder should cover for one label box; `None` when the region
/// falls entirely outside the image.
pub fn target_region(
    bbox: &BoundingBox,
    spec: &OverlaySpec,
    image_size: (u32, u32),
) -> Option<BoundingBox> {
    let vertical = split_box(bbox, spec.region);
    let half_width = bbox.width() * spec.width_factor / 2.0;
    let center = bbox.center_x();
    BoundingBox::new(
        center - half_width,
        vertical.top(),
        center + half_width,
        vertical.bottom(),
    )
    .ok()?
    .clip(image_size.0 as f64, image_size.1 as f64)
}

/// Expand a real-valued region to whole pixels (floor left/top, ceil
/// right/bottom), clamped to the image.
pub fn round_region(region: &BoundingBox, image_size: (u32, u32)) -> Option<PixelRect> {
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let x0 = region.left().floor().clamp(0.0, w) as u32;
    let y0 = region.top().floor().clamp(0.0, h) as u32;
    let x1 = region.right().ceil().clamp(0.0, w) as u32;
    let y1 = region.bottom().ceil().clamp(0.0, h) as u32;
    (x1 > x0 && y1 > y0).then_some(PixelRect { x0, y0, x1, y1 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeWarning {
    pub region: BoundingBox,
    pub message: String,
}

/// Paste `texture`, resampled to the rounded `region`, over `image`.
pub fn composite(
    image: &Image,
    region: &BoundingBox,
    texture: &Image,
    filter: ResizeFilter,
) -> (Image, Option<CompositeWarning>) {
    let mut out = image.clone();
    let warning = composite_in_place(&mut out, region, texture, filter);
    (out, warning)
}

fn composite_in_place(
    image: &mut Image,
    region: &BoundingBox,
    texture: &Image,
    filter: ResizeFilter,
) -> Option<CompositeWarning> {
    let Some(rect) = round_region(region, image.dimensions()) else {
        let message = format!("region {region} is empty after pixel rounding; skipped");
        log::warn!("{message}");
        return Some(CompositeWarning {
            region: *region,
            message,
        });
    };
    let patch = if texture.dimensions() == (rect.width(), rect.height()) {
        texture.clone()
    } else {
        imageops::resize(texture, rect.width(), rect.height(), filter.filter_type())
    };
    imageops::replace(image, &patch, rect.x0 as i64, rect.y0 as i64);
    None
}

/// Occluded image plus the pixel rectangles that were painted, in label order.
#[derive(Debug, Clone)]
pub struct OcclusionResult {
    pub image: Image,
    pub regions: Vec<PixelRect>,
    pub warnings: Vec<CompositeWarning>,
}

/// Occlude every `spec.target_class` object in label-file order; later
/// labels paint over earlier ones where regions overlap.
pub fn occlude_frame(
    image: &Image,
    labels: &FrameAnnotations,
    spec: &OverlaySpec,
) -> OcclusionResult {
    let mut out = image.clone();
    let mut regions = Vec::new();
    let mut warnings = Vec::new();
    let size = image.dimensions();
    for object in labels
        .objects
        .iter()
        .filter(|o| o.class_name() == spec.target_class)
    {
        let Some(region) = target_region(object.bbox(), spec, size) else {
            warnings.push(CompositeWarning {
                region: *object.bbox(),
                message: format!(
                    "{}: box {} lies outside the image; skipped",
                    labels.frame_id,
                    object.bbox()
                ),
            });
            continue;
        };
        match composite_in_place(&mut out, &region, &spec.texture, spec.resize_filter) {
            Some(w) => warnings.push(w),
            None => regions.extend(round_region(&region, size)),
        }
    }
    OcclusionResult {
        image: out,
        regions,
        warnings,
    }
}

/// BT.601 luma with round-half-up, in exact integer arithmetic.
pub fn luma(pixel: Rgb<u8>) -> u8 {
    let [r, g, b] = pixel.0.map(u32::from);
    ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8
}

/// Gray image that keeps three channels, `(Y, Y, Y)` per pixel.
pub fn to_grayscale(image: &Image) -> Image {
    let mut out = image.clone();
    for p in out.pixels_mut() {
        let y = luma(*p);
        *p = Rgb([y, y, y]);
    }
    out
}

pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8())
}

pub fn save_png(image: &Image, path: &Path) -> Result<()> {
    image
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}
