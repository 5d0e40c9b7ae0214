//! Subcommand implementations. Each returns `anyhow::Result`; any error
//! surfaces as exit code 1 with its message on stderr.

pub mod augment;
pub mod convert;
pub mod evaluate;
pub mod report;
pub mod split;
pub mod stub;

use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};

use trawl_core::backend::{
    parse_endpoint, Detector, ExternalBackend, ExternalConfig, ParsedEndpoint, ReplayBackend,
};
use trawl_core::dataset::{load_manifest, DatasetManifest};
use trawl_core::evaluation::LatencyRow;
use trawl_core::stream::{emit_timeseries, run_stream, FrameSource, PipelineConfig};

use crate::StreamArgs;

/// Errors that are the caller's fault (flag combinations clap cannot see);
/// main maps these to exit code 2 instead of 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn read_manifest_file(path: &Path, strict: bool) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    Ok(load_manifest(&text, strict)?)
}

pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Resolves --frames: a directory, a manifest .json, or a path-list file.
fn frame_source(path: &Path, strict: bool) -> Result<FrameSource> {
    if path.is_dir() {
        return Ok(FrameSource::from_dir(path)?);
    }
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let manifest = read_manifest_file(path, strict)?;
        let root = path.parent().unwrap_or(Path::new(""));
        return Ok(FrameSource::from_manifest(&manifest, root));
    }
    Ok(FrameSource::from_list_file(path)?)
}

fn connect_backend(spec: &str, batch: usize, timeout_ms: u64) -> Result<Box<dyn Detector>> {
    match parse_endpoint(spec).map_err(anyhow::Error::msg)? {
        ParsedEndpoint::Replay { file, delay_ms } => Ok(Box::new(
            ReplayBackend::from_file(&file)?.with_delay_ms(delay_ms),
        )),
        ParsedEndpoint::External(endpoint) => Ok(Box::new(ExternalBackend::connect(
            &endpoint,
            ExternalConfig {
                timeout: Duration::from_millis(timeout_ms),
                window: batch.max(1),
            },
        )?)),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bench,
    Stream,
}

/// Shared driver for `bench` and `stream`: run the pipeline, persist the
/// timeseries plus mode-specific artifacts, print the mode's report.
pub fn run_pipeline(
    args: &StreamArgs,
    strict: bool,
    output_dir: Option<&Path>,
    mode: Mode,
) -> Result<()> {
    let source = frame_source(&args.frames, strict)?;
    let mut backend = connect_backend(&args.backend, args.batch, args.timeout_ms)?;
    let config = PipelineConfig {
        batch_size: args.batch.max(1),
        confidence_threshold: args.confidence,
        resize_to: args.resize,
    };
    let output = run_stream(&source, backend.as_mut(), &config)?;

    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_output(
            &dir.join("timeseries.csv"),
            &emit_timeseries(&output.records),
        )?;
        match mode {
            Mode::Bench => {
                let stats = serde_json::to_string_pretty(&output.stats)?;
                write_output(&dir.join("bench.json"), &format!("{stats}\n"))?;
            }
            Mode::Stream => {
                let summary = serde_json::to_string_pretty(&output.summary)?;
                write_output(&dir.join("summary.json"), &format!("{summary}\n"))?;
            }
        }
    }

    match mode {
        Mode::Bench => {
            match LatencyRow::from_stats(&args.name, &args.device, &output.stats) {
                Some(row) => print!("{}", trawl_core::evaluation::render_latency_table(&[row])),
                None => println!("no successful frames; ms/img undefined"),
            }
            let s = &output.stats;
            println!(
                "frames {} (failed {}), batch {}, wall {:.1} ms{}{}",
                s.frames,
                s.failed_frames,
                s.batch_size,
                s.wall_ms,
                s.mean_infer_ms
                    .map(|v| format!(", mean infer {v:.3} ms"))
                    .unwrap_or_default(),
                s.mean_preprocess_ms
                    .map(|v| format!(", mean preprocess {v:.3} ms"))
                    .unwrap_or_default(),
            );
        }
        Mode::Stream => {
            let q = &output.summary;
            println!(
                "frames {}, detections {} (threshold {}), frames with plastic {}",
                output.stats.frames, q.total_detections, args.confidence, q.frames_with_plastic
            );
            for (count, frames) in &q.histogram {
                println!("  {count} detections/frame: {frames} frames");
            }
        }
    }

    if backend.warning_count() > 0 {
        eprintln!(
            "warning: {} frames had no stored detections (answered empty)",
            backend.warning_count()
        );
    }
    if let Some(error) = output.session_error {
        bail!("backend session failed mid-stream: {error} (partial results were written)");
    }
    Ok(())
}
