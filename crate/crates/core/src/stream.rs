//! Near-real-time harness: feeds frames through preprocessing and a detector
//! backend, measures ms/img with preprocessing included, and aggregates
//! plastic quantification counts.
//!
//! One coordinator owns ordering and aggregation. Output records are in
//! ascending frame id regardless of backend response order, and the replay
//! backend yields byte-reproducible results for a given input.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{auto_orient, resize_stretch};
use crate::backend::{DetectRequest, Detector, FrameOutcome, ImagePayload};
use crate::dataset::{DatasetManifest, Detection};
use crate::geometry::{ImageDims, Orientation};
use crate::raster::read_raster;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("cannot read frame source {path}: {source}")]
    Source {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
}

/// One frame to process: a stable id, where its pixels live, and the EXIF
/// orientation to undo (known only when the source is a manifest).
#[derive(Debug, Clone)]
pub struct FrameSpec {
    pub image_id: String,
    pub path: PathBuf,
    pub orientation: Orientation,
}

/// An ordered sequence of frames.
#[derive(Debug, Clone)]
pub struct FrameSource {
    pub frames: Vec<FrameSpec>,
}

impl FrameSource {
    pub fn from_specs(frames: Vec<FrameSpec>) -> Self {
        Self { frames }
    }

    /// All image files in a directory, sorted by file name; frame order is
    /// name order and the image id is the file stem.
    pub fn from_dir(dir: &Path) -> Result<Self, StreamError> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|source| StreamError::Source {
                path: dir.display().to_string(),
                source,
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("ppm" | "png" | "jpg" | "jpeg")
                )
            })
            .collect();
        paths.sort();
        Ok(Self {
            frames: paths.into_iter().map(spec_from_path).collect(),
        })
    }

    /// A frame manifest: a text file with one image path per line (relative
    /// paths resolve against the list file's directory), order = frame order.
    pub fn from_list_file(list: &Path) -> Result<Self, StreamError> {
        let text = std::fs::read_to_string(list).map_err(|source| StreamError::Source {
            path: list.display().to_string(),
            source,
        })?;
        let base = list.parent().unwrap_or(Path::new(""));
        let frames = text
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty())
            .map(|line| spec_from_path(base.join(line)))
            .collect();
        Ok(Self { frames })
    }

    /// Frames from a dataset manifest, in manifest order, carrying each
    /// image's orientation metadata.
    pub fn from_manifest(manifest: &DatasetManifest, image_root: &Path) -> Self {
        Self {
            frames: manifest
                .images
                .iter()
                .map(|image| FrameSpec {
                    image_id: image.image_id.clone(),
                    path: image_root.join(&image.path),
                    orientation: image.orientation,
                })
                .collect(),
        }
    }
}

fn spec_from_path(path: PathBuf) -> FrameSpec {
    let image_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("frame")
        .to_string();
    FrameSpec {
        image_id,
        path,
        orientation: Orientation::Upright,
    }
}

/// Streaming-pipeline knobs. Defaults: batch 32, confidence 0.5, resize to
/// 416x416.
#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub batch_size: usize,
    pub confidence_threshold: f64,
    pub resize_to: ImageDims,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            confidence_threshold: 0.5,
            resize_to: ImageDims::new(416, 416).expect("static dims"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        if self.batch_size == 0 {
            return Err(StreamError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(StreamError::InvalidConfig(format!(
                "confidence threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum FrameStatus {
    Ok,
    Failed(String),
}

/// One streamed frame with timing. `preprocess_ms` covers decode plus
/// orient/resize (decode alone is also broken out, so either accounting
/// convention can be reconstructed); `infer_ms` is the backend-reported
/// model latency; `total_ms` spans preprocessing start to response arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub image_id: String,
    pub status: FrameStatus,
    /// Detections kept after confidence filtering.
    pub detections: Vec<DetectionRecord>,
    pub decode_ms: f64,
    pub preprocess_ms: f64,
    pub infer_ms: f64,
    pub total_ms: f64,
}

/// Flat serializable form of one kept detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub class: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            class: d.class_id,
            x_min: d.bbox.x_min(),
            y_min: d.bbox.y_min(),
            x_max: d.bbox.x_max(),
            y_max: d.bbox.y_max(),
            score: d.score,
        }
    }
}

/// Aggregate ms/img statistics. `mean_ms_per_img` is wall-clock pipeline
/// time divided by successfully processed frames, preprocessing included;
/// the percentile and mean fields are `None` when no frame succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub frames: usize,
    pub failed_frames: usize,
    pub batch_size: usize,
    pub wall_ms: f64,
    pub mean_ms_per_img: Option<f64>,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub throughput_fps: Option<f64>,
    pub mean_infer_ms: Option<f64>,
    pub mean_preprocess_ms: Option<f64>,
}

impl BenchStats {
    fn from_records(records: &[FrameRecord], wall_ms: f64, batch_size: usize) -> Self {
        let ok: Vec<&FrameRecord> = records
            .iter()
            .filter(|r| r.status == FrameStatus::Ok)
            .collect();
        let failed_frames = records.len() - ok.len();
        if ok.is_empty() {
            return Self {
                frames: records.len(),
                failed_frames,
                batch_size,
                wall_ms,
                mean_ms_per_img: None,
                p50_ms: None,
                p95_ms: None,
                throughput_fps: None,
                mean_infer_ms: None,
                mean_preprocess_ms: None,
            };
        }
        let mut totals: Vec<f64> = ok.iter().map(|r| r.total_ms).collect();
        totals.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
        // Nearest-rank percentiles.
        let percentile = |q: f64| -> f64 {
            let rank = ((q * totals.len() as f64).ceil() as usize).clamp(1, totals.len());
            totals[rank - 1]
        };
        let mean = wall_ms / ok.len() as f64;
        Self {
            frames: records.len(),
            failed_frames,
            batch_size,
            wall_ms,
            mean_ms_per_img: Some(mean),
            p50_ms: Some(percentile(0.50)),
            p95_ms: Some(percentile(0.95)),
            throughput_fps: Some(1000.0 / mean),
            mean_infer_ms: Some(ok.iter().map(|r| r.infer_ms).sum::<f64>() / ok.len() as f64),
            mean_preprocess_ms: Some(
                ok.iter().map(|r| r.preprocess_ms).sum::<f64>() / ok.len() as f64,
            ),
        }
    }
}

/// Per-frame detection counts aggregated over the stream. No cross-frame
/// tracking or deduplication happens here, so cumulative counts overcount
/// objects that persist across frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantificationSummary {
    /// Detections at or above the operating threshold, summed over frames.
    pub total_detections: u64,
    pub frames_with_plastic: u64,
    /// detections-per-frame histogram: count -> number of frames.
    pub histogram: BTreeMap<usize, u64>,
    /// Running total of kept detections, one entry per frame in order.
    pub cumulative: Vec<u64>,
}

impl QuantificationSummary {
    fn from_records(records: &[FrameRecord]) -> Self {
        let mut total = 0u64;
        let mut with_plastic = 0u64;
        let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
        let mut cumulative = Vec::with_capacity(records.len());
        for record in records {
            let n = record.detections.len();
            total += n as u64;
            if n > 0 {
                with_plastic += 1;
            }
            *histogram.entry(n).or_insert(0) += 1;
            cumulative.push(total);
        }
        Self {
            total_detections: total,
            frames_with_plastic: with_plastic,
            histogram,
            cumulative,
        }
    }
}

/// Everything a stream run produces. `session_error` carries a backend
/// session failure; the records gathered before it are still returned.
#[derive(Debug)]
pub struct StreamOutput {
    pub records: Vec<FrameRecord>,
    pub stats: BenchStats,
    pub summary: QuantificationSummary,
    pub session_error: Option<String>,
}

/// Runs the pipeline: decode, auto-orient, stretch-resize, submit in
/// pipelined batches, reassemble in frame order, and aggregate timing and
/// quantification. Unreadable frames are recorded as failed and the stream
/// continues; a backend session error ends the run with partial results.
pub fn run_stream<D: Detector + ?Sized>(
    source: &FrameSource,
    detector: &mut D,
    config: &PipelineConfig,
) -> Result<StreamOutput, StreamError> {
    config.validate()?;
    let start = Instant::now();
    let mut records: Vec<FrameRecord> = Vec::with_capacity(source.frames.len());
    let mut session_error = None;

    'stream: for (batch_index, batch) in source.frames.chunks(config.batch_size).enumerate() {
        let base_id = (batch_index * config.batch_size) as u64;
        let mut requests = Vec::with_capacity(batch.len());
        let mut prep: HashMapPrep = Default::default();

        for (offset, frame) in batch.iter().enumerate() {
            let frame_id = base_id + offset as u64;
            let t0 = Instant::now();
            let raster = match read_raster(&frame.path) {
                Ok(r) => r,
                Err(e) => {
                    records.push(failed_record(frame_id, frame, 0.0, 0.0, e.to_string()));
                    continue;
                }
            };
            let decode_ms = t0.elapsed().as_secs_f64() * 1000.0;
            let (upright, _) = auto_orient(&raster, frame.orientation, &[]);
            let resized = resize_stretch(&upright, config.resize_to);
            let preprocess_ms = t0.elapsed().as_secs_f64() * 1000.0;

            prep.insert(frame_id, (decode_ms, preprocess_ms, t0));
            requests.push(DetectRequest {
                frame_id,
                image_id: frame.image_id.clone(),
                payload: ImagePayload::Raster(resized),
                dims: config.resize_to,
            });
        }

        if requests.is_empty() {
            continue;
        }
        let results = match detector.detect_batch(&requests) {
            Ok(results) => results,
            Err(e) => {
                session_error = Some(e.to_string());
                for request in &requests {
                    let frame = &batch[(request.frame_id - base_id) as usize];
                    let (decode_ms, preprocess_ms, _) = prep[&request.frame_id];
                    records.push(failed_record(
                        request.frame_id,
                        frame,
                        decode_ms,
                        preprocess_ms,
                        "backend session error".into(),
                    ));
                }
                break 'stream;
            }
        };

        for result in results {
            let frame = &batch[(result.frame_id - base_id) as usize];
            let (decode_ms, preprocess_ms, t0) = prep[&result.frame_id];
            match result.outcome {
                FrameOutcome::Ok { response, .. } => {
                    let kept: Vec<DetectionRecord> = response
                        .detections
                        .iter()
                        .filter(|d| d.score >= config.confidence_threshold)
                        .map(DetectionRecord::from)
                        .collect();
                    records.push(FrameRecord {
                        frame_id: result.frame_id,
                        image_id: frame.image_id.clone(),
                        status: FrameStatus::Ok,
                        detections: kept,
                        decode_ms,
                        preprocess_ms,
                        infer_ms: response.model_latency_ms,
                        total_ms: t0.elapsed().as_secs_f64() * 1000.0,
                    });
                }
                FrameOutcome::TimedOut => {
                    records.push(failed_record(
                        result.frame_id,
                        frame,
                        decode_ms,
                        preprocess_ms,
                        "timeout".into(),
                    ));
                }
            }
        }
    }

    records.sort_by_key(|r| r.frame_id);
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    let stats = BenchStats::from_records(&records, wall_ms, config.batch_size);
    let summary = QuantificationSummary::from_records(&records);
    Ok(StreamOutput {
        records,
        stats,
        summary,
        session_error,
    })
}

type HashMapPrep = std::collections::HashMap<u64, (f64, f64, Instant)>;

fn failed_record(
    frame_id: u64,
    frame: &FrameSpec,
    decode_ms: f64,
    preprocess_ms: f64,
    reason: String,
) -> FrameRecord {
    FrameRecord {
        frame_id,
        image_id: frame.image_id.clone(),
        status: FrameStatus::Failed(reason),
        detections: Vec::new(),
        decode_ms,
        preprocess_ms,
        infer_ms: 0.0,
        total_ms: preprocess_ms,
    }
}

/// CSV timeseries: one row per frame in frame order. Failed frames leave
/// `n_detections` and `infer_ms` empty and carry status `failed`.
pub fn emit_timeseries(records: &[FrameRecord]) -> String {
    let mut out =
        String::from("frame_id,image_id,n_detections,preprocess_ms,infer_ms,total_ms,status\n");
    for r in records {
        match &r.status {
            FrameStatus::Ok => out.push_str(&format!(
                "{},{},{},{:.3},{:.3},{:.3},ok\n",
                r.frame_id,
                r.image_id,
                r.detections.len(),
                r.preprocess_ms,
                r.infer_ms,
                r.total_ms
            )),
            FrameStatus::Failed(_) => out.push_str(&format!(
                "{},{},,{:.3},,{:.3},failed\n",
                r.frame_id, r.image_id, r.preprocess_ms, r.total_ms
            )),
        }
    }
    out
}
