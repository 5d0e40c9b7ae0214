//! `trawl evaluate` — score a detection file, print the metrics row, and
//! optionally persist the report, its CSV twin, and the PR curve.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};

use trawl_core::dataset::GroundTruth;
use trawl_core::evaluation::{
    evaluate, load_detections, pr_curve, render_detection_csv, render_detection_table, DetectionRow,
};

use super::{read_manifest_file, write_output};

pub fn run(
    manifest_path: &Path,
    detections_path: &Path,
    iou: f64,
    confidence: f64,
    name: &str,
    strict: bool,
    output_dir: Option<&Path>,
) -> Result<()> {
    let manifest = read_manifest_file(manifest_path, strict)?;
    let text = std::fs::read_to_string(detections_path)
        .with_context(|| format!("cannot read detections {}", detections_path.display()))?;
    let detections = load_detections(&text)?;

    let report = evaluate(&manifest, &detections, iou, confidence)?;
    let rows = [DetectionRow::from_report(name, &report)];
    print!("{}", render_detection_table(&rows));
    println!(
        "recall {:.2}, tp {}, fp {}, fn {} (iou {}, confidence {})",
        report.recall,
        report.confusion.tp,
        report.confusion.fp,
        report.confusion.fn_,
        iou,
        confidence,
    );

    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let json = serde_json::to_string_pretty(&report)?;
        write_output(&dir.join("report.json"), &format!("{json}\n"))?;
        write_output(&dir.join("report.csv"), &render_detection_csv(&rows))?;

        // Class-aware joint sweep over every detection, for external plotting.
        let truths_by_image: BTreeMap<String, Vec<GroundTruth>> = manifest
            .images
            .iter()
            .map(|i| (i.image_id.clone(), i.truths.clone()))
            .collect();
        let curve = pr_curve(&detections, &truths_by_image, iou)?;
        write_output(&dir.join("pr_curve.csv"), &curve.to_csv())?;
    }
    Ok(())
}
