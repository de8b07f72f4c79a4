//! Axis-aligned pixel rectangles.

use std::fmt;

use crate::error::{Error, Result};

/// Pixel-space box in `(left, top, right, bottom)` order, origin top-left.
///
/// Coordinates must be finite with `left < right` and `top < bottom`.
/// Negative or out-of-image coordinates are accepted because KITTI labels
/// truncated objects that way; consumers decide whether to clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self> {
        let reason = if ![left, top, right, bottom].iter().all(|v| v.is_finite()) {
            Some("non-finite coordinate")
        } else if left >= right {
            Some("left must be < right")
        } else if top >= bottom {
            Some("top must be < bottom")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::Geometry {
                left,
                top,
                right,
                bottom,
                reason,
            }),
            None => Ok(Self {
                left,
                top,
                right,
                bottom,
            }),
        }
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn bottom(&self) -> f64 {
        self.bottom
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center_x(&self) -> f64 {
        self.left + self.width() / 2.0
    }

    /// Area of the overlap with `other`, zero when disjoint or only touching.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.right.min(other.right) - self.left.max(other.left);
        let h = self.bottom.min(other.bottom) - self.top.max(other.top);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Clip to `[0, width] x [0, height]`; `None` when nothing remains.
    pub fn clip(&self, width: f64, height: f64) -> Option<BoundingBox> {
        BoundingBox::new(
            self.left.max(0.0),
            self.top.max(0.0),
            self.right.min(width),
            self.bottom.min(height),
        )
        .ok()
    }

    /// True when the box extends past `[0, width] x [0, height]` by more than `tolerance` pixels.
    pub fn exceeds(&self, width: f64, height: f64, tolerance: f64) -> bool {
        self.left < -tolerance
            || self.top < -tolerance
            || self.right > width + tolerance
            || self.bottom > height + tolerance
    }

    pub fn union_hull(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            left: self.left.min(other.left),
            top: self.top.min(other.top),
            right: self.right.max(other.right),
            bottom: self.bottom.max(other.bottom),
        }
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.left, self.top, self.right, self.bottom
        )
    }
}
