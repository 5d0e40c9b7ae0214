//! `trawl` — batch front end for the detection-pipeline toolkit.
//!
//! Exit codes: 0 success, 1 data error (unreadable or invalid inputs),
//! 2 usage error (bad flags or values; clap's default).

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trawl_core::dataset::SplitFractions;
use trawl_core::geometry::ImageDims;

#[derive(Parser)]
#[command(
    name = "trawl",
    version,
    about = "Detection-pipeline toolkit: convert, split, augment, evaluate, bench, stream, report"
)]
struct Cli {
    /// Seed for every stochastic step (splitting, augmentation draws).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Reject unknown fields when reading manifests.
    #[arg(long, global = true)]
    strict: bool,
    /// Directory for generated artifacts (reports, curves, timeseries).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Darknet,
    Manifest,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between Darknet label directories and the JSON manifest.
    Convert {
        #[arg(long, value_enum)]
        from: Format,
        #[arg(long, value_enum)]
        to: Format,
        /// Darknet directory or manifest file, per --from.
        #[arg(long)]
        input: PathBuf,
        /// Manifest file or output directory, per --to.
        #[arg(long)]
        output: PathBuf,
        /// Dataset name recorded in a produced manifest.
        #[arg(long, default_value = "dataset")]
        name: String,
        /// Comma-separated class names for Darknet imports.
        #[arg(long, default_value = "trash_plastic", value_delimiter = ',')]
        classes: Vec<String>,
    },
    /// Assign train/val/test tags, deterministically for a seed.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// train,val,test — nonnegative, summing to 1.
        #[arg(long, value_parser = parse_fractions)]
        fractions: SplitFractions,
        #[arg(long)]
        output: PathBuf,
    },
    /// Expand a dataset with jittered/flipped copies of its train images.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        /// Where image paths resolve; defaults to the manifest's directory.
        #[arg(long)]
        image_root: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Provenance sidecar path; defaults to <output>.provenance.json.
        #[arg(long)]
        provenance: Option<PathBuf>,
        /// Augmented copies per train image (2 triples the dataset).
        #[arg(long, default_value_t = 2)]
        copies: u32,
        /// Brightness factor range lo,hi.
        #[arg(long, value_parser = parse_range, default_value = "0.7,1.3")]
        brightness: (f64, f64),
        /// Saturation factor range lo,hi.
        #[arg(long, value_parser = parse_range, default_value = "0.7,1.3")]
        saturation: (f64, f64),
        #[arg(long, default_value_t = 0.5)]
        flip_h: f64,
        #[arg(long, default_value_t = 0.0)]
        flip_v: f64,
    },
    /// Score a detection file against a manifest and print the metrics row.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Detection file: JSON lines of image_id/class/box/score.
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value_t = 0.5)]
        confidence: f64,
        /// Row label in the printed table.
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Measure ms/img through a backend and print the latency row.
    Bench(StreamArgs),
    /// Stream frames through a backend and summarize quantification.
    Stream(StreamArgs),
    /// Render combined metric/latency tables from saved reports.
    Report {
        /// Repeatable: NAME=report.json (from `evaluate`).
        #[arg(long = "eval", value_parser = parse_named_path)]
        evals: Vec<(String, PathBuf)>,
        /// Repeatable: NAME:DEVICE=bench.json (from `bench`).
        #[arg(long = "bench", value_parser = parse_bench_path)]
        benches: Vec<(String, String, PathBuf)>,
        /// Emit CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
    /// Serve the wire protocol on stdio: a no-op detector, or stored
    /// detections keyed by request path stem. A reference backend for
    /// pipeline testing.
    StubBackend {
        /// Detection file to replay (JSON lines).
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Artificial model latency per frame.
        #[arg(long, default_value_t = 0.0)]
        delay_ms: f64,
    },
}

/// Flags shared by `bench` and `stream`.
#[derive(Args)]
struct StreamArgs {
    /// Frame source: a directory of images, a manifest .json, or a text file
    /// listing one image path per line.
    #[arg(long)]
    frames: PathBuf,
    /// Backend spec: replay:FILE[:DELAY_MS], exec:PROGRAM ARGS..., or
    /// tcp:HOST:PORT.
    #[arg(long)]
    backend: String,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.5)]
    confidence: f64,
    /// Network input size WxH frames are stretched to.
    #[arg(long, value_parser = parse_dims, default_value = "416x416")]
    resize: ImageDims,
    /// Per-request timeout for external backends.
    #[arg(long, default_value_t = 5000)]
    timeout_ms: u64,
    /// Row label in the printed table.
    #[arg(long, default_value = "model")]
    name: String,
    /// Device column label in the printed table.
    #[arg(long, default_value = "local")]
    device: String,
}

fn parse_fractions(s: &str) -> Result<SplitFractions, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected train,val,test".into());
    }
    let mut values = [0f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("invalid number \"{part}\""))?;
    }
    SplitFractions::new(values[0], values[1], values[2]).map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("invalid number \"{lo}\""))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("invalid number \"{hi}\""))?;
    if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo > hi {
        return Err(format!("range ({lo}, {hi}) must satisfy 0 < lo <= hi"));
    }
    Ok((lo, hi))
}

fn parse_dims(s: &str) -> Result<ImageDims, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: u32 = w
        .trim()
        .parse()
        .map_err(|_| format!("invalid width \"{w}\""))?;
    let h: u32 = h
        .trim()
        .parse()
        .map_err(|_| format!("invalid height \"{h}\""))?;
    ImageDims::new(w, h).map_err(|e| e.to_string())
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected NAME=FILE")?;
    if name.is_empty() {
        return Err("empty name".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn parse_bench_path(s: &str) -> Result<(String, String, PathBuf), String> {
    let (label, path) = s.split_once('=').ok_or("expected NAME[:DEVICE]=FILE")?;
    let (name, device) = match label.split_once(':') {
        Some((name, device)) => (name, device),
        None => (label, "local"),
    };
    if name.is_empty() {
        return Err("empty name".into());
    }
    Ok((name.to_string(), device.to_string(), PathBuf::from(path)))
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert {
            from,
            to,
            input,
            output,
            name,
            classes,
        } => commands::convert::run(from, to, &input, &output, &name, classes, cli.strict),
        Command::Split {
            manifest,
            fractions,
            output,
        } => commands::split::run(&manifest, fractions, cli.seed, &output, cli.strict),
        Command::Augment {
            manifest,
            image_root,
            output,
            provenance,
            copies,
            brightness,
            saturation,
            flip_h,
            flip_v,
        } => commands::augment::run(commands::augment::Params {
            manifest,
            image_root,
            output,
            provenance,
            copies,
            brightness,
            saturation,
            flip_h,
            flip_v,
            seed: cli.seed,
            strict: cli.strict,
        }),
        Command::Evaluate {
            manifest,
            detections,
            iou,
            confidence,
            name,
        } => commands::evaluate::run(
            &manifest,
            &detections,
            iou,
            confidence,
            &name,
            cli.strict,
            cli.output_dir.as_deref(),
        ),
        Command::Bench(args) => commands::run_pipeline(
            &args,
            cli.strict,
            cli.output_dir.as_deref(),
            commands::Mode::Bench,
        ),
        Command::Stream(args) => commands::run_pipeline(
            &args,
            cli.strict,
            cli.output_dir.as_deref(),
            commands::Mode::Stream,
        ),
        Command::Report {
            evals,
            benches,
            csv,
        } => commands::report::run(&evals, &benches, csv),
        Command::StubBackend {
            detections,
            delay_ms,
        } => commands::stub::run(detections.as_deref(), delay_ms),
    };
    if let Err(error) = result {
        eprintln!("error: {error:#}");
        let code = if error.downcast_ref::<commands::UsageError>().is_some() {
            2
        } else {
            1
        };
        std::process::exit(code);
    }
}
