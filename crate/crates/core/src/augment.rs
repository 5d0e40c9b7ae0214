//! Raster-level preprocessing and augmentation: auto-orient, stretch-resize,
//! brightness/saturation jitter, flips, and deterministic dataset expansion.
//!
//! Per-image augmentation randomness is keyed by (seed, image id, copy
//! index), never by execution order, so the expanded dataset is bit-identical
//! across runs and safe to produce in parallel.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{AnnotatedImage, DatasetError, DatasetManifest, GroundTruth, Split};
use crate::geometry::{GeometryError, ImageDims, Orientation};
use crate::raster::{read_raster, write_raster, Raster, RasterError};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid augment spec: {0}")]
    InvalidSpec(String),
    #[error("nonpositive jitter factor {0}")]
    NonpositiveFactor(f64),
    #[error("image \"{0}\" already carries an #aug suffix; augmenting twice would collide")]
    IdCollision(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Rotates/mirrors the raster to upright (orientation becomes 1) and remaps
/// the ground-truth boxes with it, so every box keeps covering the same
/// pixels. Width and height swap for the 90-degree cases.
pub fn auto_orient(
    raster: &Raster,
    orientation: Orientation,
    truths: &[GroundTruth],
) -> (Raster, Vec<GroundTruth>) {
    let remapped = truths
        .iter()
        .map(|t| GroundTruth {
            bbox: t.bbox.remap_orientation(orientation),
            class_id: t.class_id,
        })
        .collect();
    if orientation == Orientation::Upright {
        return (raster.clone(), remapped);
    }

    let (w, h) = (raster.width(), raster.height());
    let out_dims = raster.dims().oriented(orientation);
    let mut out = Raster::filled(out_dims, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            // Integer form of Orientation::map_point, exact at pixel centers.
            let (qx, qy) = match orientation {
                Orientation::Upright => (x, y),
                Orientation::MirrorHorizontal => (w - 1 - x, y),
                Orientation::Rotate180 => (w - 1 - x, h - 1 - y),
                Orientation::MirrorVertical => (x, h - 1 - y),
                Orientation::Transpose => (y, x),
                Orientation::Rotate90Cw => (h - 1 - y, x),
                Orientation::Transverse => (h - 1 - y, w - 1 - x),
                Orientation::Rotate90Ccw => (y, w - 1 - x),
            };
            out.set(qx, qy, raster.get(x, y));
        }
    }
    (out, remapped)
}

/// Nearest-neighbor plain stretch to `to` (no letterboxing). Normalized
/// boxes are unaffected; resizing to the raster's own dims is the identity.
pub fn resize_stretch(raster: &Raster, to: ImageDims) -> Raster {
    if to == raster.dims() {
        return raster.clone();
    }
    let sx = f64::from(raster.width()) / f64::from(to.width());
    let sy = f64::from(raster.height()) / f64::from(to.height());
    Raster::from_fn(to, |x, y| {
        let src_x = (((f64::from(x) + 0.5) * sx) as u32).min(raster.width() - 1);
        let src_y = (((f64::from(y) + 0.5) * sy) as u32).min(raster.height() - 1);
        raster.get(src_x, src_y)
    })
}

/// Scales every channel by `factor`, rounding and clamping to [0, 255].
pub fn jitter_brightness(raster: &Raster, factor: f64) -> Result<Raster, AugmentError> {
    if !factor.is_finite() || factor <= 0.0 {
        return Err(AugmentError::NonpositiveFactor(factor));
    }
    Ok(raster.map_channels(|c| (f64::from(c) * factor).round().clamp(0.0, 255.0) as u8))
}

/// Interpolates each pixel between its luma and itself: factor 0 is
/// grayscale, 1 the identity, above 1 oversaturated. Luma uses the BT.601
/// weights `0.299 R + 0.587 G + 0.114 B`, rounded to an integer first so the
/// operation is order-independent and exactly testable.
pub fn jitter_saturation(raster: &Raster, factor: f64) -> Result<Raster, AugmentError> {
    if !factor.is_finite() || factor < 0.0 {
        return Err(AugmentError::NonpositiveFactor(factor));
    }
    Ok(raster.map_pixels(|[r, g, b]| {
        let luma = (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)).round();
        let adjust = |c: u8| -> u8 {
            (luma + factor * (f64::from(c) - luma))
                .round()
                .clamp(0.0, 255.0) as u8
        };
        [adjust(r), adjust(g), adjust(b)]
    }))
}

/// Mirrors the raster about the vertical axis (reverses each row).
pub fn flip_raster_h(raster: &Raster) -> Raster {
    let w = raster.width();
    Raster::from_fn(raster.dims(), |x, y| raster.get(w - 1 - x, y))
}

/// Mirrors the raster about the horizontal axis (reverses the row order).
pub fn flip_raster_v(raster: &Raster) -> Raster {
    let h = raster.height();
    Raster::from_fn(raster.dims(), |x, y| raster.get(x, h - 1 - y))
}

/// Knobs for the augmentation pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    /// Multiplicative brightness factor range (lo, hi), 0 < lo <= hi.
    pub brightness_range: (f64, f64),
    /// Multiplicative saturation factor range (lo, hi), 0 < lo <= hi.
    pub saturation_range: (f64, f64),
    pub flip_h_prob: f64,
    pub flip_v_prob: f64,
    /// Augmented copies generated per eligible image; 2 copies triple the
    /// dataset.
    pub copies_per_image: u32,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        // Ranges are visibly perturbing yet rarely saturating. Vertical flips
        // default off: this imagery is gravity-oriented.
        Self {
            brightness_range: (0.7, 1.3),
            saturation_range: (0.7, 1.3),
            flip_h_prob: 0.5,
            flip_v_prob: 0.0,
            copies_per_image: 2,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let check_range = |name: &str, (lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo > hi {
                Err(AugmentError::InvalidSpec(format!(
                    "{name} range ({lo}, {hi}) must satisfy 0 < lo <= hi"
                )))
            } else {
                Ok(())
            }
        };
        check_range("brightness", self.brightness_range)?;
        check_range("saturation", self.saturation_range)?;
        for (name, p) in [
            ("flip_h_prob", self.flip_h_prob),
            ("flip_v_prob", self.flip_v_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(AugmentError::InvalidSpec(format!(
                    "{name} = {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Factors and flips applied to one augmented image, recorded in the
/// provenance sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub id: String,
    pub source_id: String,
    pub copy_index: u32,
    pub brightness: f64,
    pub saturation: f64,
    pub flip_h: bool,
    pub flip_v: bool,
}

/// Result of an augmentation pass: the expanded manifest plus one provenance
/// record per augmented image.
#[derive(Debug)]
pub struct AugmentOutput {
    pub manifest: DatasetManifest,
    pub provenance: Vec<AugmentRecord>,
}

/// Serializes provenance records for the sidecar file.
pub fn provenance_json(records: &[AugmentRecord]) -> String {
    let mut text = serde_json::to_string_pretty(records).expect("in-memory serialization");
    text.push('\n');
    text
}

/// Expands a dataset with jittered/flipped copies of its images.
///
/// Each eligible image gains `copies_per_image` copies with ids `{id}#aug{k}`
/// and rasters written as PPM under `aug/` in the image root. Copies of
/// val/test-tagged images are not generated — augmented data must not leak
/// into held-out splits — so only train-tagged (or untagged) images expand.
/// Draw order per copy is brightness, saturation, horizontal flip, vertical
/// flip, from a stream keyed by (seed, image id, copy index).
pub fn augment_dataset(
    manifest: &DatasetManifest,
    image_root: &Path,
    spec: &AugmentSpec,
) -> Result<AugmentOutput, AugmentError> {
    spec.validate()?;
    manifest.validate()?;

    let mut out = DatasetManifest::new(manifest.name.clone(), manifest.classes.clone());
    let mut provenance = Vec::new();

    if spec.copies_per_image > 0 {
        std::fs::create_dir_all(image_root.join("aug")).map_err(|e| RasterError::Io {
            path: image_root.join("aug").display().to_string(),
            source: e,
        })?;
    }

    for image in &manifest.images {
        if image.image_id.contains("#aug") {
            return Err(AugmentError::IdCollision(image.image_id.clone()));
        }
        out.images.push(image.clone());
        let eligible = !matches!(image.split, Some(Split::Val) | Some(Split::Test));
        if !eligible || spec.copies_per_image == 0 {
            continue;
        }

        let source = read_raster(&image_root.join(&image.path))?;
        for copy_index in 1..=spec.copies_per_image {
            let mut rng = copy_rng(spec.seed, &image.image_id, copy_index);
            let brightness = sample_range(&mut rng, spec.brightness_range);
            let saturation = sample_range(&mut rng, spec.saturation_range);
            let flip_h = rng.gen_bool(spec.flip_h_prob);
            let flip_v = rng.gen_bool(spec.flip_v_prob);

            let mut raster = jitter_brightness(&source, brightness)?;
            raster = jitter_saturation(&raster, saturation)?;
            let mut truths = image.truths.clone();
            if flip_h {
                raster = flip_raster_h(&raster);
                for t in &mut truths {
                    t.bbox = t.bbox.flip_h();
                }
            }
            if flip_v {
                raster = flip_raster_v(&raster);
                for t in &mut truths {
                    t.bbox = t.bbox.flip_v();
                }
            }

            let id = format!("{}#aug{copy_index}", image.image_id);
            let rel_path = format!("aug/{}.ppm", sanitize_id(&id));
            write_raster(&image_root.join(&rel_path), &raster)?;

            out.images.push(AnnotatedImage {
                image_id: id.clone(),
                path: rel_path,
                dims: image.dims,
                orientation: image.orientation,
                truths,
                split: image.split,
            });
            provenance.push(AugmentRecord {
                id,
                source_id: image.image_id.clone(),
                copy_index,
                brightness,
                saturation,
                flip_h,
                flip_v,
            });
        }
    }

    out.validate()?;
    Ok(AugmentOutput {
        manifest: out,
        provenance,
    })
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Deterministic per-copy RNG keyed by (seed, image id, copy index).
fn copy_rng(seed: u64, image_id: &str, copy_index: u32) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(image_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(copy_index.to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + rng.gen::<f64>() * (hi - lo)
}
