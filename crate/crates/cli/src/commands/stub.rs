//! `trawl stub-backend` — a reference wire-protocol detector on stdio.
//!
//! Answers every request with the stored detections for the request path's
//! file stem (or none), after an optional artificial delay. Useful as an
//! `exec:` backend for pipeline tests and as a template for wiring real
//! models to the protocol.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};

use trawl_core::backend::wire::{WireDetection, WireRequest, WireResponse};
use trawl_core::dataset::Detection;
use trawl_core::evaluation::load_detections;

pub fn run(detections: Option<&Path>, delay_ms: f64) -> Result<()> {
    let mut by_stem: HashMap<String, Vec<Detection>> = HashMap::new();
    if let Some(path) = detections {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read detections {}", path.display()))?;
        for d in load_detections(&text)? {
            by_stem.entry(d.image_id).or_default().push(d.detection);
        }
    }

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in stdin.lock().lines() {
        let line = line.context("stdin read failed")?;
        if line.trim().is_empty() {
            continue;
        }
        let request: WireRequest = match serde_json::from_str(&line) {
            Ok(request) => request,
            Err(e) => {
                // Protocol error lines abort the session by contract.
                let message = serde_json::json!({ "error": format!("bad request: {e}") });
                writeln!(out, "{message}")?;
                out.flush()?;
                bail!("malformed request line");
            }
        };

        let started = Instant::now();
        if delay_ms > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(delay_ms / 1000.0));
        }
        let stem = Path::new(&request.path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let detections: Vec<WireDetection> = by_stem
            .get(stem)
            .map(|stored| stored.iter().map(WireDetection::from).collect())
            .unwrap_or_default();
        let response = WireResponse {
            frame_id: request.frame_id,
            detections,
            latency_ms: started.elapsed().as_secs_f64() * 1000.0,
        };
        writeln!(out, "{}", serde_json::to_string(&response)?)?;
        out.flush()?;
    }
    Ok(())
}
