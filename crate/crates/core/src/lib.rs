//! Detection-pipeline toolkit for marine debris quantification.
//!
//! Everything around a trained detector, minus the training itself:
//!
//! - [`geometry`] — normalized bounding-box math: IoU, pixel conversion,
//!   flips, EXIF orientation remaps.
//! - [`dataset`] — Darknet labels, the canonical JSON manifest, and
//!   deterministic dataset splitting.
//! - [`raster`] / [`augment`] — PPM/PNG/JPEG rasters, auto-orient,
//!   stretch-resize to the network input size, brightness/saturation jitter,
//!   and seeded dataset expansion.
//! - [`evaluation`] — greedy matching, PR curves, average precision, mAP,
//!   F1, and table rendering.
//! - [`backend`] — a replay detector for deterministic tests plus a
//!   newline-delimited JSON wire protocol to external inference processes.
//! - [`stream`] — the streaming harness measuring ms/img with preprocessing
//!   included, and per-frame quantification summaries.
//! - [`synth`] — seeded synthetic fixtures for tests, demos, and benches.

pub mod augment;
pub mod backend;
pub mod dataset;
pub mod evaluation;
pub mod geometry;
pub mod raster;
pub mod stream;
pub mod synth;

pub use dataset::{DatasetManifest, Detection, GroundTruth};
pub use geometry::{BBox, ImageDims, Orientation, PixelBox};
