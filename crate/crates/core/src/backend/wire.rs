//! Wire protocol v1: UTF-8 JSON lines over stdio or TCP.
//!
//! Request:  `{"frame_id":int,"path":string,"width":int,"height":int}`
//! Response: `{"frame_id":int,"detections":[{"class":int,"x_min":f,"y_min":f,
//!           "x_max":f,"y_max":f,"score":f}],"latency_ms":float}`
//!
//! Coordinates are normalized. A line beginning `{"error":` aborts the
//! session. The format is deliberately trivial — implementable from any ML
//! runtime in a dozen lines and debuggable by eye; at millisecond-scale model
//! latencies throughput is model-bound, not protocol-bound.

use serde::{Deserialize, Serialize};

use super::{DetectResponse, SessionError};
use crate::dataset::Detection;
use crate::geometry::BBox;

/// Prefix that marks a session-aborting error line.
pub const ERROR_PREFIX: &str = "{\"error\":";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireRequest {
    pub frame_id: u64,
    pub path: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireDetection {
    pub class: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireResponse {
    pub frame_id: u64,
    pub detections: Vec<WireDetection>,
    pub latency_ms: f64,
}

impl From<&Detection> for WireDetection {
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

/// Encodes a request as one protocol line, newline included.
pub fn encode_request(request: &WireRequest) -> String {
    let mut line = serde_json::to_string(request).expect("in-memory serialization");
    line.push('\n');
    line
}

/// Encodes a response as one protocol line, newline included.
pub fn encode_response(response: &WireResponse) -> String {
    let mut line = serde_json::to_string(response).expect("in-memory serialization");
    line.push('\n');
    line
}

/// Parses and validates one response line. Error lines, malformed JSON, and
/// out-of-range values are all session-fatal.
pub fn decode_response(line: &str) -> Result<DetectResponse, SessionError> {
    let trimmed = line.trim_end_matches(['\r', '\n']);
    if trimmed.starts_with(ERROR_PREFIX) {
        return Err(SessionError::RemoteError(trimmed.to_string()));
    }
    let wire: WireResponse = serde_json::from_str(trimmed)
        .map_err(|e| SessionError::Protocol(format!("malformed response line: {e}")))?;
    if !wire.latency_ms.is_finite() || wire.latency_ms < 0.0 {
        return Err(SessionError::Protocol(format!(
            "frame {}: negative latency {}",
            wire.frame_id, wire.latency_ms
        )));
    }
    let mut detections = Vec::with_capacity(wire.detections.len());
    for d in &wire.detections {
        let bbox = BBox::new_clamped(d.x_min, d.y_min, d.x_max, d.y_max).map_err(|e| {
            SessionError::Protocol(format!("frame {}: invalid box: {e}", wire.frame_id))
        })?;
        let det = Detection::new(bbox, d.class, d.score).map_err(|e| {
            SessionError::Protocol(format!("frame {}: invalid detection: {e}", wire.frame_id))
        })?;
        detections.push(det);
    }
    Ok(DetectResponse {
        frame_id: wire.frame_id,
        detections,
        model_latency_ms: wire.latency_ms,
    })
}
