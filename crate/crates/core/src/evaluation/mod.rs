//! Detection scoring: confidence filtering, greedy IoU matching, confusion
//! counts, PR curves, average precision by curve integration, mAP, and F1.
//!
//! Matching follows the community-standard greedy protocol: detections are
//! processed in descending confidence (ties broken by input order) and each
//! claims the unmatched same-class truth of highest IoU when that IoU meets
//! the threshold. Per-image matching is independent; curve assembly is a
//! deterministic sequential reduction over the globally sorted detections.

mod detections;
mod report;

pub use detections::{load_detections, save_detections, ImageDetection};
pub use report::{
    render_detection_csv, render_detection_table, render_latency_csv, render_latency_table,
    render_report, DetectionRow, LatencyRow,
};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetManifest, Detection, GroundTruth};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("iou threshold {0} outside (0, 1]")]
    InvalidIouThreshold(f64),
    #[error("confidence threshold {0} outside [0, 1]")]
    InvalidConfidenceThreshold(f64),
    #[error("precision-recall curve undefined: no ground-truth boxes in scope")]
    NoTruths,
    #[error("average precision undefined on an empty curve")]
    EmptyCurve,
    #[error("n-point interpolation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("detection references unknown image id \"{0}\"")]
    UnknownImageId(String),
    #[error("detection line {line}: {message}")]
    DetectionParse { line: usize, message: String },
}

/// One detection's fate under greedy matching: the index it had in the
/// input slice and the truth it claimed, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchResult {
    pub det_index: usize,
    pub truth_index: Option<usize>,
}

/// Greedily matches detections against same-class truths for one image.
///
/// Results are returned in processing order (descending score, input order
/// on ties). Each truth is claimed at most once.
pub fn match_detections(
    dets: &[Detection],
    truths: &[GroundTruth],
    iou_threshold: f64,
) -> Vec<MatchResult> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut claimed = vec![false; truths.len()];
    let mut results = Vec::with_capacity(dets.len());
    for det_index in order {
        let det = &dets[det_index];
        let mut best: Option<(usize, f64)> = None;
        for (truth_index, truth) in truths.iter().enumerate() {
            if claimed[truth_index] || truth.class_id != det.class_id {
                continue;
            }
            let iou = det.bbox.iou(&truth.bbox);
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((truth_index, iou));
            }
        }
        if let Some((truth_index, _)) = best {
            claimed[truth_index] = true;
            results.push(MatchResult {
                det_index,
                truth_index: Some(truth_index),
            });
        } else {
            results.push(MatchResult {
                det_index,
                truth_index: None,
            });
        }
    }
    results
}

/// Box-level confusion counts. A true negative has no standard definition
/// for detection (there is no enumerable set of correctly-absent boxes), so
/// only TP, FP, and FN are tracked; `tp + fn` always equals the number of
/// ground-truth boxes in scope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn add(&mut self, other: ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Drops detections below the confidence threshold, matches the rest, and
/// counts TP (matched), FP (unmatched detections), FN (unmatched truths).
/// Sub-threshold detections are dropped entirely — they are not FPs.
pub fn confusion_at(
    dets: &[Detection],
    truths: &[GroundTruth],
    iou_threshold: f64,
    confidence_threshold: f64,
) -> ConfusionCounts {
    let kept: Vec<Detection> = dets
        .iter()
        .copied()
        .filter(|d| d.score >= confidence_threshold)
        .collect();
    let matches = match_detections(&kept, truths, iou_threshold);
    let tp = matches.iter().filter(|m| m.truth_index.is_some()).count();
    ConfusionCounts {
        tp,
        fp: kept.len() - tp,
        fn_: truths.len() - tp,
    }
}

/// Precision and recall with the degenerate-count convention: when there are
/// no truths and no detections both are vacuously 1; otherwise an undefined
/// member (0/0) is 0.
pub fn precision_recall(c: ConfusionCounts) -> (f64, f64) {
    let precision = if c.tp + c.fp == 0 {
        if c.fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        if c.fp == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    (precision, recall)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One point of the sweep: the confidence of the detection that produced it
/// plus cumulative recall and precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Precision-recall samples swept over confidence thresholds, recall
/// nondecreasing along the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub iou_threshold: f64,
    pub total_truths: usize,
}

impl PrCurve {
    /// CSV dump (threshold, recall, precision) for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,recall,precision\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6}\n",
                p.score, p.recall, p.precision
            ));
        }
        out
    }
}

/// Sweeps every detection across all images in descending score order,
/// accumulating TP/FP and emitting one (recall, precision) sample per
/// detection. Matching is per-image; the recall denominator is the total
/// truth count. Errors when there are no truths at all (the curve is
/// undefined), and when a detection references an image id absent from
/// `truths_by_image`.
pub fn pr_curve(
    dets: &[ImageDetection],
    truths_by_image: &BTreeMap<String, Vec<GroundTruth>>,
    iou_threshold: f64,
) -> Result<PrCurve, EvalError> {
    let total_truths: usize = truths_by_image.values().map(Vec::len).sum();
    if total_truths == 0 {
        return Err(EvalError::NoTruths);
    }

    // Per-image greedy matching decides each detection's TP/FP label; the
    // per-image processing order (descending score) matches the relative
    // order of the global sweep, so labels agree with a single global pass.
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (index, det) in dets.iter().enumerate() {
        if !truths_by_image.contains_key(&det.image_id) {
            return Err(EvalError::UnknownImageId(det.image_id.clone()));
        }
        by_image
            .entry(det.image_id.as_str())
            .or_default()
            .push(index);
    }

    let mut is_tp = vec![false; dets.len()];
    for (image_id, det_indices) in &by_image {
        let image_dets: Vec<Detection> = det_indices.iter().map(|&i| dets[i].detection).collect();
        let truths = &truths_by_image[*image_id];
        for m in match_detections(&image_dets, truths, iou_threshold) {
            is_tp[det_indices[m.det_index]] = m.truth_index.is_some();
        }
    }

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .detection
            .score
            .partial_cmp(&dets[a].detection.score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut points = Vec::with_capacity(dets.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for index in order {
        if is_tp[index] {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push(PrPoint {
            score: dets[index].detection.score,
            recall: tp as f64 / total_truths as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    Ok(PrCurve {
        points,
        iou_threshold,
        total_truths,
    })
}

/// How to integrate the PR curve into an average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApMode {
    /// Apply the monotone precision envelope and integrate it exactly as a
    /// step function over recall. The default.
    Continuous,
    /// Mean of envelope precision sampled at n evenly spaced recalls
    /// (the classic choices are 11 and 101).
    NPoint(usize),
}

/// Monotone envelope of the curve: for each attained recall, the maximum
/// precision at any recall at least as large. Returned as (recall, envelope
/// precision) pairs with strictly increasing recall.
fn precision_envelope(curve: &PrCurve) -> Vec<(f64, f64)> {
    let mut env: Vec<(f64, f64)> = Vec::with_capacity(curve.points.len());
    let mut best = 0.0f64;
    for p in curve.points.iter().rev() {
        best = best.max(p.precision);
        match env.last_mut() {
            Some((recall, precision)) if *recall == p.recall => *precision = best,
            _ => env.push((p.recall, best)),
        }
    }
    env.reverse();
    env
}

/// Integrates the PR curve into an average precision. Errors on an empty
/// curve.
pub fn average_precision(curve: &PrCurve, mode: ApMode) -> Result<f64, EvalError> {
    if curve.points.is_empty() {
        return Err(EvalError::EmptyCurve);
    }
    let env = precision_envelope(curve);
    match mode {
        ApMode::Continuous => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (recall, precision) in env {
                ap += (recall - prev_recall) * precision;
                prev_recall = recall;
            }
            Ok(ap)
        }
        ApMode::NPoint(n) => {
            if n < 2 {
                return Err(EvalError::TooFewPoints(n));
            }
            let mut total = 0.0;
            for k in 0..n {
                let r = k as f64 / (n - 1) as f64;
                // Envelope recalls are increasing; the first point at
                // recall >= r carries the max precision beyond r.
                let p = env
                    .iter()
                    .find(|(recall, _)| *recall >= r)
                    .map_or(0.0, |(_, precision)| *precision);
                total += p;
            }
            Ok(total / n as f64)
        }
    }
}

/// Aggregated detection metrics for one dataset at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// (class name, AP) for every class with at least one ground truth.
    pub per_class_ap: Vec<(String, f64)>,
    /// Mean of the per-class APs.
    pub map: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionCounts,
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
}

/// Scores a detection set against a manifest.
///
/// The PR sweep uses every detection — thresholding first would truncate the
/// curve and contradict the integral definition of AP — while the operating
/// point (precision/recall/F1/confusion) applies the confidence threshold.
/// mAP averages the per-class continuous AP over classes that have ground
/// truth; a class with truths but no detections contributes an AP of 0.
pub fn evaluate(
    manifest: &DatasetManifest,
    dets: &[ImageDetection],
    iou_threshold: f64,
    confidence_threshold: f64,
) -> Result<EvalReport, EvalError> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(EvalError::InvalidIouThreshold(iou_threshold));
    }
    if !(0.0..=1.0).contains(&confidence_threshold) {
        return Err(EvalError::InvalidConfidenceThreshold(confidence_threshold));
    }

    let mut truths_by_image: BTreeMap<String, Vec<GroundTruth>> = BTreeMap::new();
    for image in &manifest.images {
        truths_by_image.insert(image.image_id.clone(), image.truths.clone());
    }
    for det in dets {
        if !truths_by_image.contains_key(&det.image_id) {
            return Err(EvalError::UnknownImageId(det.image_id.clone()));
        }
    }

    // Per-class AP over classes that actually have ground truth.
    let mut per_class_ap = Vec::new();
    for (class_id, class_name) in manifest.classes.iter().enumerate() {
        let class_id = class_id as u32;
        let class_truths: BTreeMap<String, Vec<GroundTruth>> = truths_by_image
            .iter()
            .map(|(id, truths)| {
                let filtered = truths
                    .iter()
                    .copied()
                    .filter(|t| t.class_id == class_id)
                    .collect();
                (id.clone(), filtered)
            })
            .collect();
        if class_truths.values().all(Vec::is_empty) {
            continue;
        }
        let class_dets: Vec<ImageDetection> = dets
            .iter()
            .filter(|d| d.detection.class_id == class_id)
            .cloned()
            .collect();
        let ap = if class_dets.is_empty() {
            0.0
        } else {
            let curve = pr_curve(&class_dets, &class_truths, iou_threshold)?;
            average_precision(&curve, ApMode::Continuous)?
        };
        per_class_ap.push((class_name.clone(), ap));
    }
    let map = if per_class_ap.is_empty() {
        0.0
    } else {
        per_class_ap.iter().map(|(_, ap)| ap).sum::<f64>() / per_class_ap.len() as f64
    };

    // Operating-point metrics at the confidence threshold, summed per image.
    let mut dets_by_image: HashMap<&str, Vec<Detection>> = HashMap::new();
    for det in dets {
        dets_by_image
            .entry(det.image_id.as_str())
            .or_default()
            .push(det.detection);
    }
    let mut confusion = ConfusionCounts::default();
    for (image_id, truths) in &truths_by_image {
        let empty = Vec::new();
        let image_dets = dets_by_image.get(image_id.as_str()).unwrap_or(&empty);
        confusion.add(confusion_at(
            image_dets,
            truths,
            iou_threshold,
            confidence_threshold,
        ));
    }
    let (precision, recall) = precision_recall(confusion);

    Ok(EvalReport {
        per_class_ap,
        map,
        precision,
        recall,
        f1: f1_score(precision, recall),
        confusion,
        iou_threshold,
        confidence_threshold,
    })
}
