//! `trawl convert` — Darknet directory <-> canonical manifest.

use std::path::Path;

use anyhow::{bail, Context, Result};

use trawl_core::dataset::{
    parse_darknet_labels, save_manifest, write_darknet_labels, AnnotatedImage, DatasetManifest,
};
use trawl_core::geometry::Orientation;
use trawl_core::raster::read_dims;

use super::{read_manifest_file, write_output};
use crate::Format;

const IMAGE_EXTENSIONS: [&str; 4] = ["ppm", "png", "jpg", "jpeg"];

pub fn run(
    from: Format,
    to: Format,
    input: &Path,
    output: &Path,
    name: &str,
    classes: Vec<String>,
    strict: bool,
) -> Result<()> {
    match (from, to) {
        (Format::Darknet, Format::Manifest) => darknet_to_manifest(input, output, name, classes),
        (Format::Manifest, Format::Darknet) => manifest_to_darknet(input, output, strict),
        (Format::Darknet, Format::Darknet) | (Format::Manifest, Format::Manifest) => Err(
            super::UsageError("--from and --to name the same format; nothing to convert".into())
                .into(),
        ),
    }
}

fn darknet_to_manifest(
    input: &Path,
    output: &Path,
    name: &str,
    classes: Vec<String>,
) -> Result<()> {
    let mut image_paths: Vec<_> = std::fs::read_dir(input)
        .with_context(|| format!("cannot read input directory {}", input.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    image_paths.sort();

    let mut manifest = DatasetManifest::new(name, classes);
    let mut failures: Vec<String> = Vec::new();
    for image_path in &image_paths {
        let stem = image_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let file_name = image_path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let dims = match read_dims(image_path) {
            Ok(dims) => dims,
            Err(e) => {
                failures.push(format!("{}: {e}", image_path.display()));
                continue;
            }
        };
        // Missing label file means no objects, per Darknet convention.
        let label_path = image_path.with_extension("txt");
        let truths = if label_path.exists() {
            let text = std::fs::read_to_string(&label_path)
                .with_context(|| format!("cannot read {}", label_path.display()))?;
            match parse_darknet_labels(&text) {
                Ok(truths) => truths,
                Err(e) => {
                    failures.push(format!("{}: {e}", label_path.display()));
                    continue;
                }
            }
        } else {
            Vec::new()
        };
        manifest.images.push(AnnotatedImage {
            image_id: stem,
            path: file_name,
            dims,
            orientation: Orientation::Upright,
            truths,
            split: None,
        });
    }

    if !failures.is_empty() {
        for failure in &failures {
            eprintln!("{failure}");
        }
        bail!("{} file(s) failed to convert", failures.len());
    }
    write_output(output, &save_manifest(&manifest)?)?;
    println!(
        "wrote {} ({} images, {} boxes)",
        output.display(),
        manifest.images.len(),
        manifest.total_truths()
    );
    Ok(())
}

fn manifest_to_darknet(input: &Path, output: &Path, strict: bool) -> Result<()> {
    let manifest = read_manifest_file(input, strict)?;
    std::fs::create_dir_all(output)
        .with_context(|| format!("cannot create {}", output.display()))?;
    for image in &manifest.images {
        let path = output.join(format!("{}.txt", image.image_id));
        write_output(&path, &write_darknet_labels(&image.truths))?;
    }
    write_output(
        &output.join("classes.txt"),
        &manifest
            .classes
            .iter()
            .map(|c| format!("{c}\n"))
            .collect::<String>(),
    )?;
    println!(
        "wrote {} label file(s) to {}",
        manifest.images.len(),
        output.display()
    );
    Ok(())
}
