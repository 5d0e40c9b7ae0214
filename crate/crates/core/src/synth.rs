//! Seeded synthetic datasets and detection fixtures.
//!
//! Used by the test suites and handy for demos and benchmarking without real
//! imagery: everything is deterministic in the seed.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dataset::{AnnotatedImage, DatasetManifest, Detection, GroundTruth};
use crate::evaluation::ImageDetection;
use crate::geometry::{BBox, ImageDims, Orientation};
use crate::raster::{write_raster, Raster, RasterError};

/// A random box with sides in `[min_side, max_side]`, kept inside
/// [0.05, 0.95] so fixtures can jitter it without leaving the image.
pub fn random_box(rng: &mut impl Rng, min_side: f64, max_side: f64) -> BBox {
    let w = rng.gen_range(min_side..=max_side);
    let h = rng.gen_range(min_side..=max_side);
    let x0 = rng.gen_range(0.05..=0.95 - w);
    let y0 = rng.gen_range(0.05..=0.95 - h);
    BBox::new(x0, y0, x0 + w, y0 + h).expect("generated box is valid")
}

/// A manifest of `n_images` synthetic images named `img_0000`, `img_0001`,
/// ... with 1..=`max_truths_per_image` single-class truths each, sides in
/// [0.1, 0.3]. Paths are `{id}.ppm` next to the manifest.
pub fn synthetic_manifest(
    name: &str,
    n_images: usize,
    dims: ImageDims,
    max_truths_per_image: usize,
    seed: u64,
) -> DatasetManifest {
    assert!(max_truths_per_image >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = DatasetManifest::new(name, vec!["trash_plastic".to_string()]);
    for i in 0..n_images {
        let image_id = format!("img_{i:04}");
        let n_truths = rng.gen_range(1..=max_truths_per_image);
        let truths = (0..n_truths)
            .map(|_| GroundTruth {
                bbox: random_box(&mut rng, 0.1, 0.3),
                class_id: 0,
            })
            .collect();
        manifest.images.push(AnnotatedImage {
            path: format!("{image_id}.ppm"),
            image_id,
            dims,
            orientation: Orientation::Upright,
            truths,
            split: None,
        });
    }
    manifest
}

/// Detections that copy every truth exactly with the given score — the
/// perfect detector.
pub fn perfect_detections(manifest: &DatasetManifest, score: f64) -> Vec<ImageDetection> {
    let mut out = Vec::new();
    for image in &manifest.images {
        for truth in &image.truths {
            out.push(ImageDetection::new(
                image.image_id.clone(),
                Detection {
                    bbox: truth.bbox,
                    class_id: truth.class_id,
                    score,
                },
            ));
        }
    }
    out
}

/// A detection set engineered to score exactly `tp / (tp + fp)` precision at
/// any confidence threshold up to 0.6 and IoU threshold up to 0.6.
///
/// The first `tp` images contribute one true positive each (their first
/// truth jittered by at most 0.01 per axis, which keeps IoU above 0.6); the
/// next `fp` images contribute one far-corner false positive each. All
/// scores land in [0.6, 0.95]. Requires `tp + fp <= n_images`.
pub fn precision_fixture(
    manifest: &DatasetManifest,
    tp: usize,
    fp: usize,
    seed: u64,
) -> Vec<ImageDetection> {
    assert!(
        tp + fp <= manifest.images.len(),
        "fixture needs {} images, manifest has {}",
        tp + fp,
        manifest.images.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for image in manifest.images.iter().take(tp) {
        let truth = image.truths.first().expect("synthetic images carry truths");
        let dx = rng.gen_range(-0.01..=0.01);
        let dy = rng.gen_range(-0.01..=0.01);
        let b = truth.bbox;
        let bbox = BBox::new(
            b.x_min() + dx,
            b.y_min() + dy,
            b.x_max() + dx,
            b.y_max() + dy,
        )
        .expect("jittered box stays inside the image");
        out.push(ImageDetection::new(
            image.image_id.clone(),
            Detection {
                bbox,
                class_id: truth.class_id,
                score: rng.gen_range(0.6..=0.95),
            },
        ));
    }
    // Truth boxes never reach below 0.05, so a corner box shares no area
    // with any of them.
    for image in manifest.images.iter().skip(tp).take(fp) {
        let bbox = BBox::new(0.0, 0.0, 0.04, 0.04).expect("static box");
        out.push(ImageDetection::new(
            image.image_id.clone(),
            Detection {
                bbox,
                class_id: 0,
                score: rng.gen_range(0.6..=0.95),
            },
        ));
    }
    out
}

/// Writes a seeded noise PPM for every image in the manifest, at its
/// manifest path under `image_root`. Pixel content is keyed by (seed, image
/// id), so regenerating with the same seed is byte-identical.
pub fn write_noise_rasters(
    manifest: &DatasetManifest,
    image_root: &Path,
    seed: u64,
) -> Result<(), RasterError> {
    for image in &manifest.images {
        let mut rng = keyed_rng(seed, &image.image_id);
        let mut pixels = vec![0u8; image.dims.pixel_count() * 3];
        rng.fill(pixels.as_mut_slice());
        let raster = Raster::new(image.dims, pixels)?;
        let path = image_root.join(&image.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| RasterError::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
        write_raster(&path, &raster)?;
    }
    Ok(())
}

fn keyed_rng(seed: u64, image_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(image_id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}
