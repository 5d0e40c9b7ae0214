//! `trawl report` — merge saved evaluation reports and bench stats into the
//! two summary tables.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use trawl_core::evaluation::{
    render_detection_csv, render_detection_table, render_latency_csv, render_latency_table,
    DetectionRow, EvalReport, LatencyRow,
};
use trawl_core::stream::BenchStats;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {what} {}", path.display()))
}

pub fn run(
    evals: &[(String, PathBuf)],
    benches: &[(String, String, PathBuf)],
    csv: bool,
) -> Result<()> {
    if evals.is_empty() && benches.is_empty() {
        bail!("nothing to report: pass --eval NAME=FILE and/or --bench NAME:DEVICE=FILE");
    }

    let mut detection_rows = Vec::new();
    for (name, path) in evals {
        let report: EvalReport = read_json(path, "evaluation report")?;
        detection_rows.push(DetectionRow::from_report(name, &report));
    }

    // One latency row per model name, columns merged across devices.
    let mut latency_rows: Vec<LatencyRow> = Vec::new();
    for (name, device, path) in benches {
        let stats: BenchStats = read_json(path, "bench stats")?;
        let Some(mean) = stats.mean_ms_per_img else {
            bail!("bench stats {} has no successful frames", path.display());
        };
        match latency_rows.iter_mut().find(|row| &row.name == name) {
            Some(row) => row.ms_per_img.push((device.clone(), mean)),
            None => latency_rows.push(LatencyRow {
                name: name.clone(),
                ms_per_img: vec![(device.clone(), mean)],
            }),
        }
    }

    if csv {
        if !detection_rows.is_empty() {
            print!("{}", render_detection_csv(&detection_rows));
        }
        if !latency_rows.is_empty() {
            if !detection_rows.is_empty() {
                println!();
            }
            print!("{}", render_latency_csv(&latency_rows));
        }
    } else {
        if !detection_rows.is_empty() {
            print!("{}", render_detection_table(&detection_rows));
        }
        if !latency_rows.is_empty() {
            if !detection_rows.is_empty() {
                println!();
            }
            print!("{}", render_latency_table(&latency_rows));
        }
    }
    Ok(())
}
