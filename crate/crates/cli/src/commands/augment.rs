//! `trawl augment` — seeded dataset expansion with a provenance sidecar.

use std::path::PathBuf;

use anyhow::{Context, Result};

use trawl_core::augment::{augment_dataset, provenance_json, AugmentSpec};
use trawl_core::dataset::save_manifest;

use super::{read_manifest_file, write_output};

pub struct Params {
    pub manifest: PathBuf,
    pub image_root: Option<PathBuf>,
    pub output: PathBuf,
    pub provenance: Option<PathBuf>,
    pub copies: u32,
    pub brightness: (f64, f64),
    pub saturation: (f64, f64),
    pub flip_h: f64,
    pub flip_v: f64,
    pub seed: u64,
    pub strict: bool,
}

pub fn run(params: Params) -> Result<()> {
    let manifest = read_manifest_file(&params.manifest, params.strict)?;
    let image_root = match params.image_root {
        Some(root) => root,
        None => params
            .manifest
            .parent()
            .context("manifest path has no parent directory")?
            .to_path_buf(),
    };
    let spec = AugmentSpec {
        brightness_range: params.brightness,
        saturation_range: params.saturation,
        flip_h_prob: params.flip_h,
        flip_v_prob: params.flip_v,
        copies_per_image: params.copies,
        seed: params.seed,
    };
    let out = augment_dataset(&manifest, &image_root, &spec)?;

    write_output(&params.output, &save_manifest(&out.manifest)?)?;
    let provenance_path = params.provenance.unwrap_or_else(|| {
        let mut path = params.output.clone();
        path.set_extension("provenance.json");
        path
    });
    write_output(&provenance_path, &provenance_json(&out.provenance))?;
    println!(
        "wrote {} ({} -> {} images, seed {}); provenance in {}",
        params.output.display(),
        manifest.images.len(),
        out.manifest.images.len(),
        params.seed,
        provenance_path.display(),
    );
    Ok(())
}
