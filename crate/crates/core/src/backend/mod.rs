//! Pluggable detector backends.
//!
//! [`ReplayBackend`] serves prerecorded detections for deterministic pipeline
//! tests and benchmarking; [`ExternalBackend`] speaks a newline-delimited
//! JSON protocol to an inference process over stdio or TCP, so real models
//! plug in without linking any ML runtime. A session is owned by one logical
//! pipeline and is not shared across pipelines.

mod external;
mod replay;
pub mod wire;

pub use external::{
    parse_endpoint, BackendEndpoint, ExternalBackend, ExternalConfig, ParsedEndpoint,
};
pub use replay::ReplayBackend;

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::Detection;
use crate::geometry::ImageDims;
use crate::raster::Raster;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot read detections from {path}: {message}")]
    DetectionFile { path: String, message: String },
    #[error("failed to spawn backend process \"{command}\": {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to connect to {address}: {source}")]
    Connect {
        address: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors that terminate a detector session. After one of these the session
/// must not be reused.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("backend reported an error: {0}")]
    RemoteError(String),
    #[error("connection to backend lost")]
    ConnectionLost,
    #[error("frame id {0} is not strictly increasing within the session")]
    NonMonotonicFrameId(u64),
    #[error("session already aborted")]
    Aborted,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The image a detector should look at: a file on disk, or an in-memory
/// raster (spooled to a temp file when a wire protocol needs a path).
#[derive(Debug, Clone)]
pub enum ImagePayload {
    Path(PathBuf),
    Raster(Raster),
}

/// One frame submitted to a detector. Frame ids increase monotonically
/// within a session; the image id is the stable key replay files use.
#[derive(Debug, Clone)]
pub struct DetectRequest {
    pub frame_id: u64,
    pub image_id: String,
    pub payload: ImagePayload,
    pub dims: ImageDims,
}

/// A detector's answer for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectResponse {
    pub frame_id: u64,
    pub detections: Vec<Detection>,
    /// Model-side latency as reported by the backend, in milliseconds.
    pub model_latency_ms: f64,
}

/// Outcome of one frame in a batch.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameOutcome {
    Ok {
        response: DetectResponse,
        /// Wall-clock delay from this frame's submission to its response,
        /// measured by the harness so protocol overhead stays observable.
        wall_ms: f64,
    },
    /// The per-request timeout elapsed; the pipeline continues.
    TimedOut,
}

/// Per-frame results of a batch, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub frame_id: u64,
    pub outcome: FrameOutcome,
}

/// A detector session: accepts pipelined request batches and returns one
/// outcome per frame, matched by frame id regardless of arrival order.
pub trait Detector {
    fn detect_batch(
        &mut self,
        requests: &[DetectRequest],
    ) -> Result<Vec<BatchResult>, SessionError>;

    /// Count of requests answered with an empty fallback because the backend
    /// had no entry for them (replay misses). Zero for live backends.
    fn warning_count(&self) -> u64 {
        0
    }
}
