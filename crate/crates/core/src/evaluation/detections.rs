//! Detection files: JSON lines, one object per detection —
//! `{"image_id","class","x_min","y_min","x_max","y_max","score"}`.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::Detection;
use crate::geometry::BBox;

/// A detection tagged with the image it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDetection {
    pub image_id: String,
    pub detection: Detection,
}

impl ImageDetection {
    pub fn new(image_id: impl Into<String>, detection: Detection) -> Self {
        Self {
            image_id: image_id.into(),
            detection,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DetectionLine {
    image_id: String,
    class: u32,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    score: f64,
}

/// Parses a detection file, preserving line order. Blank lines are skipped;
/// any malformed line fails with its 1-based line number.
pub fn load_detections(text: &str) -> Result<Vec<ImageDetection>, EvalError> {
    let mut out = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: DetectionLine =
            serde_json::from_str(raw).map_err(|e| EvalError::DetectionParse {
                line,
                message: e.to_string(),
            })?;
        let bbox = BBox::new_clamped(parsed.x_min, parsed.y_min, parsed.x_max, parsed.y_max)
            .map_err(|e| EvalError::DetectionParse {
                line,
                message: e.to_string(),
            })?;
        let detection = Detection::new(bbox, parsed.class, parsed.score).map_err(|e| {
            EvalError::DetectionParse {
                line,
                message: e.to_string(),
            }
        })?;
        out.push(ImageDetection {
            image_id: parsed.image_id,
            detection,
        });
    }
    Ok(out)
}

/// Serializes detections as JSON lines with 6-decimal coordinates.
pub fn save_detections(dets: &[ImageDetection]) -> String {
    let mut out = String::new();
    for d in dets {
        out.push_str(&format!(
            "{{\"image_id\":{},\"class\":{},\"x_min\":{:.6},\"y_min\":{:.6},\"x_max\":{:.6},\"y_max\":{:.6},\"score\":{:.6}}}\n",
            serde_json::to_string(&d.image_id).expect("string serialization"),
            d.detection.class_id,
            d.detection.bbox.x_min(),
            d.detection.bbox.y_min(),
            d.detection.bbox.x_max(),
            d.detection.bbox.y_max(),
            d.detection.score,
        ));
    }
    out
}
