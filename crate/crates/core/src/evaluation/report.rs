//! Tabular report rendering: one detection-metrics table (mAP, F1,
//! precision per model) and one latency table (ms/img per model and device),
//! each available as aligned plain text and as CSV.

use super::EvalReport;
use crate::stream::BenchStats;

/// One detection-metrics row. mAP is carried as a percentage so a row built
/// from literal figures renders them verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub name: String,
    pub map_percent: f64,
    pub f1: f64,
    pub precision: f64,
}

impl DetectionRow {
    pub fn from_report(name: impl Into<String>, report: &EvalReport) -> Self {
        Self {
            name: name.into(),
            map_percent: report.map * 100.0,
            f1: report.f1,
            precision: report.precision,
        }
    }
}

/// One latency row: ms/img per named device.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyRow {
    pub name: String,
    pub ms_per_img: Vec<(String, f64)>,
}

impl LatencyRow {
    pub fn from_stats(
        name: impl Into<String>,
        device: impl Into<String>,
        stats: &BenchStats,
    ) -> Option<Self> {
        stats.mean_ms_per_img.map(|mean| Self {
            name: name.into(),
            ms_per_img: vec![(device.into(), mean)],
        })
    }
}

fn render_aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        let line = cells
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                if i == 0 {
                    format!("{cell:<width$}", width = widths[i])
                } else {
                    format!("{cell:>width$}", width = widths[i])
                }
            })
            .collect::<Vec<_>>()
            .join("  ");
        out.push_str(line.trim_end());
        out.push('\n');
    };
    emit(&mut out, header);
    for row in rows {
        emit(&mut out, row);
    }
    out
}

/// Aligned text table: Network | mAP | F1 | Precision.
pub fn render_detection_table(rows: &[DetectionRow]) -> String {
    let header = ["Network", "mAP", "F1", "Precision"]
        .map(String::from)
        .to_vec();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                format!("{:.1}", r.map_percent),
                format!("{:.2}", r.f1),
                format!("{:.2}", r.precision),
            ]
        })
        .collect();
    render_aligned(&header, &cells)
}

/// CSV twin of [`render_detection_table`].
pub fn render_detection_csv(rows: &[DetectionRow]) -> String {
    let mut out = String::from("network,map,f1,precision\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.1},{:.2},{:.2}\n",
            r.name, r.map_percent, r.f1, r.precision
        ));
    }
    out
}

fn device_columns(rows: &[LatencyRow]) -> Vec<String> {
    let mut devices: Vec<String> = Vec::new();
    for row in rows {
        for (device, _) in &row.ms_per_img {
            if !devices.contains(device) {
                devices.push(device.clone());
            }
        }
    }
    devices
}

/// Aligned text table: Network | one ms/img column per device, in
/// first-seen order. Missing cells render as "-".
pub fn render_latency_table(rows: &[LatencyRow]) -> String {
    let devices = device_columns(rows);
    let mut header = vec!["Network".to_string()];
    header.extend(devices.iter().cloned());
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.name.clone()];
            for device in &devices {
                let cell = r
                    .ms_per_img
                    .iter()
                    .find(|(d, _)| d == device)
                    .map_or("-".to_string(), |(_, v)| format!("{v:.1}"));
                row.push(cell);
            }
            row
        })
        .collect();
    render_aligned(&header, &cells)
}

/// CSV twin of [`render_latency_table`].
pub fn render_latency_csv(rows: &[LatencyRow]) -> String {
    let devices = device_columns(rows);
    let mut out = String::from("network");
    for device in &devices {
        out.push(',');
        out.push_str(device);
    }
    out.push('\n');
    for r in rows {
        out.push_str(&r.name);
        for device in &devices {
            let cell = r
                .ms_per_img
                .iter()
                .find(|(d, _)| d == device)
                .map_or(String::new(), |(_, v)| format!("{v:.1}"));
            out.push(',');
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out
}

/// Renders both tables, detection metrics first, separated by a blank line.
/// Either side may be empty.
pub fn render_report(detection_rows: &[DetectionRow], latency_rows: &[LatencyRow]) -> String {
    let mut out = String::new();
    if !detection_rows.is_empty() {
        out.push_str(&render_detection_table(detection_rows));
    }
    if !latency_rows.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&render_latency_table(latency_rows));
    }
    out
}
