//! Shared test doubles and independent oracles.
//!
//! Everything here deliberately avoids the library's own code paths where a
//! check needs independence: the AP oracle enumerates thresholds and
//! integrates by quadrature, the matcher and IoU are re-derived from scratch,
//! and the echo server speaks the wire protocol from raw JSON values.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;

use rand::Rng;

use trawl_core::evaluation::ImageDetection;
use trawl_core::{BBox, GroundTruth};

// ---------------------------------------------------------------------------
// Independent IoU + greedy matcher (oracle side)

/// IoU from first principles on corner coordinates.
pub fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let iy = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let inter = ix * iy;
    let area_a = (a.x_max() - a.x_min()) * (a.y_max() - a.y_min());
    let area_b = (b.x_max() - b.x_min()) * (b.y_max() - b.y_min());
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Labels each detection TP/FP under the documented greedy protocol,
/// re-implemented independently: per image, descending score (ties by input
/// order), best unmatched same-class truth by IoU, threshold inclusive.
pub fn oracle_labels(
    dets: &[ImageDetection],
    truths_by_image: &HashMap<String, Vec<GroundTruth>>,
    iou_threshold: f64,
) -> Vec<bool> {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id.as_str()).or_default().push(i);
    }
    let mut is_tp = vec![false; dets.len()];
    for (image_id, mut indices) in by_image {
        indices.sort_by(|&a, &b| {
            dets[b]
                .detection
                .score
                .partial_cmp(&dets[a].detection.score)
                .unwrap()
        });
        let truths = &truths_by_image[image_id];
        let mut used = vec![false; truths.len()];
        for det_index in indices {
            let det = &dets[det_index].detection;
            let mut best: Option<(usize, f64)> = None;
            for (ti, truth) in truths.iter().enumerate() {
                if used[ti] || truth.class_id != det.class_id {
                    continue;
                }
                let iou = oracle_iou(&det.bbox, &truth.bbox);
                if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((ti, iou));
                }
            }
            if let Some((ti, _)) = best {
                used[ti] = true;
                is_tp[det_index] = true;
            }
        }
    }
    is_tp
}

// ---------------------------------------------------------------------------
// Brute-force AP oracle

/// Quadrature sample count: the smallest multiple of lcm(1..=10) = 2520
/// above 10^6, so every attainable recall (a multiple of 1/total_truths for
/// total_truths <= 10) falls exactly on a cell edge and midpoint quadrature
/// of the step envelope is exact.
pub const AP_ORACLE_SAMPLES: usize = 1_000_440;

/// Average precision by brute force: enumerate every distinct score as a
/// threshold, compute the (recall, precision) point at each by re-counting,
/// and integrate the precision envelope by midpoint quadrature. Scores must
/// be distinct for threshold enumeration to match a per-detection sweep.
pub fn oracle_ap(labeled: &[(f64, bool)], total_truths: usize) -> f64 {
    assert!(total_truths > 0 && total_truths <= 10);
    let mut thresholds: Vec<f64> = labeled.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    // One PR point per threshold, by exhaustive re-counting.
    let mut points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let kept: Vec<&(f64, bool)> = labeled.iter().filter(|(s, _)| *s >= t).collect();
            let tp = kept.iter().filter(|(_, is_tp)| *is_tp).count();
            let recall = tp as f64 / total_truths as f64;
            let precision = tp as f64 / kept.len() as f64;
            (recall, precision)
        })
        .collect();
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Suffix max of precision over recall-sorted points.
    let mut suffix_max = vec![0.0f64; points.len()];
    let mut best = 0.0f64;
    for (i, &(_, p)) in points.iter().enumerate().rev() {
        best = best.max(p);
        suffix_max[i] = best;
    }

    // Midpoint quadrature with a pointer walk; Kahan keeps the sum honest.
    let n = AP_ORACLE_SAMPLES;
    let mut pointer = 0usize;
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for k in 0..n {
        let r = (k as f64 + 0.5) / n as f64;
        while pointer < points.len() && points[pointer].0 < r {
            pointer += 1;
        }
        let env = if pointer < points.len() {
            suffix_max[pointer]
        } else {
            0.0
        };
        let y = env - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum / n as f64
}

// ---------------------------------------------------------------------------
// Loopback echo detector (wire-protocol test double)

/// Behavior knobs for the echo server.
#[derive(Default, Clone)]
pub struct EchoConfig {
    /// Swap each consecutive pair of responses (out-of-order delivery).
    pub reorder_pairs: bool,
    /// Never answer these frame ids.
    pub drop_frame_ids: HashSet<u64>,
    /// Emit this raw line (no newline added) after N good responses.
    pub garbage_after: Option<(usize, String)>,
    /// Write output in chunks of at most this many bytes, splitting lines
    /// arbitrarily. Exercises the self-delimiting property.
    pub max_chunk: Option<usize>,
    /// Detections to return per frame id, as raw JSON objects.
    pub detections: HashMap<u64, Vec<serde_json::Value>>,
    /// Latency figure to report.
    pub latency_ms: f64,
    /// Close the connection after this many responses.
    pub close_after: Option<usize>,
    /// Sleep this long before answering these frame ids (forces client-side
    /// timeouts followed by late arrivals).
    pub delay_frame_ids: HashSet<u64>,
    pub frame_delay: std::time::Duration,
}

/// Spawns a one-connection echo detector on a loopback port and returns its
/// address. It answers every request with the configured detections
/// (default none), honoring the reorder/drop/garbage/chunk knobs.
pub fn spawn_echo_server(config: EchoConfig) -> (String, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let addr = listener.local_addr().expect("local addr").to_string();
    let handle = std::thread::spawn(move || {
        let (stream, _) = match listener.accept() {
            Ok(pair) => pair,
            Err(_) => return,
        };
        let reader = BufReader::new(stream.try_clone().expect("clone stream"));
        let mut writer = stream;
        let mut rng = rand::thread_rng();
        let mut emitted = 0usize;
        let mut held_back: Option<String> = None;

        let mut send = |writer: &mut std::net::TcpStream, line: &str| {
            let bytes = line.as_bytes();
            match config.max_chunk {
                Some(max) => {
                    let mut rest = bytes;
                    while !rest.is_empty() {
                        let take = rng.gen_range(1..=max.min(rest.len()));
                        if writer.write_all(&rest[..take]).is_err() {
                            return;
                        }
                        let _ = writer.flush();
                        rest = &rest[take..];
                    }
                }
                None => {
                    let _ = writer.write_all(bytes);
                    let _ = writer.flush();
                }
            }
        };

        for line in reader.lines() {
            if config.close_after.is_some_and(|n| emitted >= n) {
                return;
            }
            let Ok(line) = line else { break };
            let Ok(request) = serde_json::from_str::<serde_json::Value>(&line) else {
                break;
            };
            let frame_id = request["frame_id"].as_u64().expect("request has frame_id");
            if config.drop_frame_ids.contains(&frame_id) {
                continue;
            }
            if let Some((after, ref garbage)) = config.garbage_after {
                if emitted == after {
                    send(&mut writer, garbage);
                    emitted += 1;
                    continue;
                }
            }
            if config.delay_frame_ids.contains(&frame_id) {
                std::thread::sleep(config.frame_delay);
            }
            let dets = config
                .detections
                .get(&frame_id)
                .cloned()
                .unwrap_or_default();
            let response = serde_json::json!({
                "frame_id": frame_id,
                "detections": dets,
                "latency_ms": config.latency_ms,
            });
            let response_line = format!("{response}\n");
            emitted += 1;
            if config.reorder_pairs {
                match held_back.take() {
                    None => held_back = Some(response_line),
                    Some(first) => {
                        send(&mut writer, &response_line);
                        send(&mut writer, &first);
                    }
                }
            } else {
                send(&mut writer, &response_line);
            }
        }
        if let Some(last) = held_back {
            send(&mut writer, &last);
        }
    });
    (addr, handle)
}
