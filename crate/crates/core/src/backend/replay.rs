//! Replay backend: serves detections prerecorded in an evaluation-format
//! JSONL file, keyed by image id. Deterministic by construction, with an
//! optional artificial per-frame delay for bench testing.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use super::{
    BackendError, BatchResult, DetectRequest, DetectResponse, Detector, FrameOutcome, SessionError,
};
use crate::dataset::Detection;
use crate::evaluation::{load_detections, ImageDetection};

pub struct ReplayBackend {
    by_image: HashMap<String, Vec<Detection>>,
    delay: Option<Duration>,
    misses: u64,
}

impl ReplayBackend {
    /// Loads a detection file (one JSON object per line). Detections keep
    /// their file order within each image.
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::DetectionFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let dets = load_detections(&text).map_err(|e| BackendError::DetectionFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self::from_detections(dets))
    }

    pub fn from_detections(dets: Vec<ImageDetection>) -> Self {
        let mut by_image: HashMap<String, Vec<Detection>> = HashMap::new();
        for d in dets {
            by_image.entry(d.image_id).or_default().push(d.detection);
        }
        Self {
            by_image,
            delay: None,
            misses: 0,
        }
    }

    /// Sleeps this long before answering each frame, simulating model
    /// latency. The reported latency is the measured sleep duration.
    pub fn with_delay_ms(mut self, delay_ms: f64) -> Self {
        self.delay = (delay_ms > 0.0).then(|| Duration::from_secs_f64(delay_ms / 1000.0));
        self
    }

    /// Requests whose image id had no stored detections, answered with an
    /// empty list — the semantics of a model finding nothing, not an error.
    pub fn miss_count(&self) -> u64 {
        self.misses
    }
}

impl Detector for ReplayBackend {
    fn detect_batch(
        &mut self,
        requests: &[DetectRequest],
    ) -> Result<Vec<BatchResult>, SessionError> {
        let batch_start = Instant::now();
        let mut results = Vec::with_capacity(requests.len());
        for request in requests {
            let infer_start = Instant::now();
            if let Some(delay) = self.delay {
                // Millisecond-scale delays are busy-waited: thread::sleep
                // overshoots by the scheduler quantum, which at this scale is
                // a measurable fraction of the delay itself. Longer delays
                // sleep the bulk and spin the tail.
                let target = infer_start + delay;
                if delay >= Duration::from_millis(10) {
                    std::thread::sleep(delay - Duration::from_millis(5));
                }
                while Instant::now() < target {
                    std::hint::spin_loop();
                }
            }
            let model_latency_ms = infer_start.elapsed().as_secs_f64() * 1000.0;
            let detections = match self.by_image.get(&request.image_id) {
                Some(stored) => stored.clone(),
                None => {
                    self.misses += 1;
                    Vec::new()
                }
            };
            results.push(BatchResult {
                frame_id: request.frame_id,
                outcome: FrameOutcome::Ok {
                    response: DetectResponse {
                        frame_id: request.frame_id,
                        detections,
                        model_latency_ms,
                    },
                    wall_ms: batch_start.elapsed().as_secs_f64() * 1000.0,
                },
            });
        }
        Ok(results)
    }

    fn warning_count(&self) -> u64 {
        self.misses
    }
}
