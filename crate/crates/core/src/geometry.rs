//! Bounding-box geometry: normalized/pixel conversion, IoU, and remappings
//! under resize, flips, and EXIF orientation changes.
//!
//! All boxes are axis-aligned. The canonical form is the normalized corner
//! form [`BBox`] with the origin at the top-left, x rightward, y downward;
//! Darknet's center form is converted at the format boundary. Everything here
//! is pure double-precision math on immutable values and is safe to call from
//! any thread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from constructing or converting geometric values.
#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },
    #[error("invalid pixel box ({left}, {top}, {right}, {bottom}): {reason}")]
    InvalidPixelBox {
        left: f64,
        top: f64,
        right: f64,
        bottom: f64,
        reason: &'static str,
    },
    #[error("pixel box ({left}, {top}, {right}, {bottom}) exceeds image dims {width}x{height}")]
    OutOfBounds {
        left: f64,
        top: f64,
        right: f64,
        bottom: f64,
        width: u32,
        height: u32,
    },
    #[error("invalid image dims {width}x{height}: both sides must be >= 1")]
    InvalidDims { width: u32, height: u32 },
    #[error("invalid EXIF orientation code {0}: must be in 1..=8")]
    InvalidOrientation(u8),
}

/// Tolerance for clamping float noise at format boundaries. Coordinates
/// overshooting [0, 1] by at most this much are clamped; anything larger is
/// treated as corrupt input by the parsers.
pub const COORD_CLAMP_EPS: f64 = 1e-6;

/// Axis-aligned box in normalized coordinates.
///
/// Invariants (enforced at construction): `0 <= x_min <= x_max <= 1` and
/// `0 <= y_min <= y_max <= 1`. Degenerate zero-area boxes are representable;
/// [`BBox::iou`] with them is 0 by the union-zero rule, and the dataset
/// parsers reject them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    /// Builds a box from normalized corner coordinates.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let err = |reason| GeometryError::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            reason,
        };
        let all = [x_min, y_min, x_max, y_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite coordinate"));
        }
        if all.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(err("coordinate outside [0, 1]"));
        }
        if x_min > x_max || y_min > y_max {
            return Err(err("min corner exceeds max corner"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Like [`BBox::new`] but clamps coordinates overshooting [0, 1] by at
    /// most [`COORD_CLAMP_EPS`] (float noise from third-party annotators).
    /// Larger violations still error.
    pub fn new_clamped(
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    ) -> Result<Self, GeometryError> {
        let clamp = |v: f64| -> Result<f64, GeometryError> {
            if !v.is_finite() || !(-COORD_CLAMP_EPS..=1.0 + COORD_CLAMP_EPS).contains(&v) {
                Err(GeometryError::InvalidBox {
                    x_min,
                    y_min,
                    x_max,
                    y_max,
                    reason: "coordinate outside [0, 1] beyond clamp tolerance",
                })
            } else {
                Ok(v.clamp(0.0, 1.0))
            }
        };
        Self::new(clamp(x_min)?, clamp(y_min)?, clamp(x_max)?, clamp(y_max)?)
    }

    /// Builds a box from normalized center form `(cx, cy, w, h)`.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new_clamped(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// Normalized center form `(cx, cy, w, h)`.
    pub fn to_center(&self) -> (f64, f64, f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
            self.x_max - self.x_min,
            self.y_max - self.y_min,
        )
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Normalized area, in [0, 1].
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Area of overlap with `other`, 0 when disjoint.
    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        w * h
    }

    /// Intersection over union with `other`.
    ///
    /// Total on valid boxes; returns 0 when the union area is 0 (two
    /// degenerate zero-area boxes).
    pub fn iou(&self, other: &Self) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Converts to real-valued pixel coordinates: horizontal coordinates
    /// scale by the image width, vertical ones by the image height.
    pub fn to_pixel(&self, dims: ImageDims) -> PixelBox {
        PixelBox {
            left: self.x_min * f64::from(dims.width()),
            top: self.y_min * f64::from(dims.height()),
            right: self.x_max * f64::from(dims.width()),
            bottom: self.y_max * f64::from(dims.height()),
        }
    }

    /// Remaps the box from one raster size to another under plain stretching.
    ///
    /// Normalized coordinates are resize-invariant under a stretch, so this
    /// returns the box unchanged; the operation exists to carry the contract
    /// that `to_pixel(box, to)` equals the stretch-scaled `to_pixel(box,
    /// from)`.
    pub fn remap_resize(&self, _from: ImageDims, _to: ImageDims) -> Self {
        *self
    }

    /// Mirror about the vertical axis: x interval [x_min, x_max] maps to
    /// [1 - x_max, 1 - x_min], y unchanged.
    pub fn flip_h(&self) -> Self {
        Self {
            x_min: 1.0 - self.x_max,
            y_min: self.y_min,
            x_max: 1.0 - self.x_min,
            y_max: self.y_max,
        }
    }

    /// Mirror about the horizontal axis; the y analogue of [`BBox::flip_h`].
    pub fn flip_v(&self) -> Self {
        Self {
            x_min: self.x_min,
            y_min: 1.0 - self.y_max,
            x_max: self.x_max,
            y_max: 1.0 - self.y_min,
        }
    }

    /// Returns the box's coordinates in the upright raster obtained by
    /// undoing EXIF orientation `o`. Composes with the raster transform in
    /// `augment::auto_orient` so each box stays on the same pixels.
    pub fn remap_orientation(&self, o: Orientation) -> Self {
        let (ax, ay) = o.map_point(self.x_min, self.y_min);
        let (bx, by) = o.map_point(self.x_max, self.y_max);
        Self {
            x_min: ax.min(bx),
            y_min: ay.min(by),
            x_max: ax.max(bx),
            y_max: ay.max(by),
        }
    }
}

/// Axis-aligned box in real-valued pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
}

impl PixelBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self, GeometryError> {
        let err = |reason| GeometryError::InvalidPixelBox {
            left,
            top,
            right,
            bottom,
            reason,
        };
        if [left, top, right, bottom].iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite coordinate"));
        }
        if left < 0.0 || top < 0.0 {
            return Err(err("negative coordinate"));
        }
        if left > right || top > bottom {
            return Err(err("min corner exceeds max corner"));
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
        })
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

    /// Inverse of [`BBox::to_pixel`], exact up to floating point (round-trip
    /// error below 1e-9 per coordinate).
    ///
    /// Rejects boxes exceeding `dims` — that signals a corrupt annotation
    /// rather than float noise.
    pub fn to_normalized(&self, dims: ImageDims) -> Result<BBox, GeometryError> {
        if self.right > f64::from(dims.width()) || self.bottom > f64::from(dims.height()) {
            return Err(GeometryError::OutOfBounds {
                left: self.left,
                top: self.top,
                right: self.right,
                bottom: self.bottom,
                width: dims.width(),
                height: dims.height(),
            });
        }
        BBox::new(
            self.left / f64::from(dims.width()),
            self.top / f64::from(dims.height()),
            self.right / f64::from(dims.width()),
            self.bottom / f64::from(dims.height()),
        )
    }
}

/// Raster dimensions in whole pixels, both sides at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    width: u32,
    height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidDims { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Pixel count as usize (checked against overflow at construction sizes
    /// we care about; u32 * u32 always fits in u64).
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Dimensions of the upright raster after undoing orientation `o`
    /// (width and height swap for the 90-degree cases).
    pub fn oriented(&self, o: Orientation) -> Self {
        if o.swaps_axes() {
            Self {
                width: self.height,
                height: self.width,
            }
        } else {
            *self
        }
    }
}

impl std::fmt::Display for ImageDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// EXIF orientation tag values 1..=8.
///
/// The code describes the transform that must be applied to the stored
/// raster to display it upright: 1 is identity, 3 a 180-degree rotation,
/// 6 a 90-degree clockwise rotation, 8 counterclockwise, and 2/4/5/7 the
/// mirrored variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Upright,
    MirrorHorizontal,
    Rotate180,
    MirrorVertical,
    Transpose,
    Rotate90Cw,
    Transverse,
    Rotate90Ccw,
}

impl Orientation {
    pub const ALL: [Orientation; 8] = [
        Orientation::Upright,
        Orientation::MirrorHorizontal,
        Orientation::Rotate180,
        Orientation::MirrorVertical,
        Orientation::Transpose,
        Orientation::Rotate90Cw,
        Orientation::Transverse,
        Orientation::Rotate90Ccw,
    ];

    /// Parses an EXIF orientation code, rejecting anything outside 1..=8.
    pub fn from_code(code: u8) -> Result<Self, GeometryError> {
        match code {
            1 => Ok(Self::Upright),
            2 => Ok(Self::MirrorHorizontal),
            3 => Ok(Self::Rotate180),
            4 => Ok(Self::MirrorVertical),
            5 => Ok(Self::Transpose),
            6 => Ok(Self::Rotate90Cw),
            7 => Ok(Self::Transverse),
            8 => Ok(Self::Rotate90Ccw),
            other => Err(GeometryError::InvalidOrientation(other)),
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Self::Upright => 1,
            Self::MirrorHorizontal => 2,
            Self::Rotate180 => 3,
            Self::MirrorVertical => 4,
            Self::Transpose => 5,
            Self::Rotate90Cw => 6,
            Self::Transverse => 7,
            Self::Rotate90Ccw => 8,
        }
    }

    /// The orientation whose transform undoes this one. Transpose and
    /// transverse are involutions; the two 90-degree rotations swap.
    pub fn inverse(&self) -> Self {
        match self {
            Self::Rotate90Cw => Self::Rotate90Ccw,
            Self::Rotate90Ccw => Self::Rotate90Cw,
            other => *other,
        }
    }

    /// Whether undoing this orientation swaps raster width and height.
    pub fn swaps_axes(&self) -> bool {
        matches!(
            self,
            Self::Transpose | Self::Rotate90Cw | Self::Transverse | Self::Rotate90Ccw
        )
    }

    /// Maps a normalized point in the stored raster to its position in the
    /// upright raster. The same map, applied at pixel centers, defines the
    /// raster permutation in `augment::auto_orient`.
    pub fn map_point(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Self::Upright => (x, y),
            Self::MirrorHorizontal => (1.0 - x, y),
            Self::Rotate180 => (1.0 - x, 1.0 - y),
            Self::MirrorVertical => (x, 1.0 - y),
            Self::Transpose => (y, x),
            Self::Rotate90Cw => (1.0 - y, x),
            Self::Transverse => (1.0 - y, 1.0 - x),
            Self::Rotate90Ccw => (y, 1.0 - x),
        }
    }
}
