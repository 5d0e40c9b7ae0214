//! Darknet label files: one file per image, UTF-8, lines
//! `class cx cy w h` in normalized center form with 6-decimal floats.

use super::{DatasetError, GroundTruth};
use crate::geometry::BBox;

/// Parses Darknet label text into corner-form ground truths, preserving
/// line order.
///
/// Blank lines are skipped. A malformed line (wrong field count,
/// non-numeric token, coordinates outside [0, 1], or nonpositive width or
/// height) fails with its 1-based line number; nothing is silently clamped
/// beyond float-noise tolerance.
pub fn parse_darknet_labels(label_text: &str) -> Result<Vec<GroundTruth>, DatasetError> {
    let mut truths = Vec::new();
    for (index, raw) in label_text.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        truths.push(parse_line(trimmed, line)?);
    }
    Ok(truths)
}

fn parse_line(line: &str, line_no: usize) -> Result<GroundTruth, DatasetError> {
    let err = |message: String| DatasetError::DarknetParse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(err(format!("expected 5 fields, found {}", fields.len())));
    }
    let class_id: u32 = fields[0]
        .parse()
        .map_err(|_| err(format!("invalid class id \"{}\"", fields[0])))?;
    let mut values = [0f64; 4];
    for (slot, field) in values.iter_mut().zip(&fields[1..]) {
        *slot = field
            .parse()
            .map_err(|_| err(format!("invalid number \"{field}\"")))?;
    }
    let [cx, cy, w, h] = values;
    for (name, value) in [("cx", cx), ("cy", cy), ("w", w), ("h", h)] {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(err(format!("{name} = {value} outside [0, 1]")));
        }
    }
    if w <= 0.0 {
        return Err(err(format!("degenerate width {w}")));
    }
    if h <= 0.0 {
        return Err(err(format!("degenerate height {h}")));
    }
    let bbox = BBox::from_center(cx, cy, w, h)
        .map_err(|e| err(format!("box extends outside the image: {e}")))?;
    Ok(GroundTruth { bbox, class_id })
}

/// Writes ground truths as Darknet center-form lines with exactly six
/// decimal places. Parsing the output recovers the input within 1e-6 per
/// field; an empty list yields empty text.
pub fn write_darknet_labels(truths: &[GroundTruth]) -> String {
    let mut out = String::new();
    for truth in truths {
        let (cx, cy, w, h) = truth.bbox.to_center();
        out.push_str(&format!(
            "{} {cx:.6} {cy:.6} {w:.6} {h:.6}\n",
            truth.class_id
        ));
    }
    out
}
