//! Cross-module integration: augmentation over real files, the streaming
//! harness against replay and external backends, and frame sources.

mod common;

use std::collections::HashSet;
use std::time::Duration;

use common::{spawn_echo_server, EchoConfig};
use trawl_core::augment::{augment_dataset, AugmentSpec};
use trawl_core::backend::{BackendEndpoint, ExternalBackend, ExternalConfig, ReplayBackend};
use trawl_core::dataset::{load_manifest, save_manifest, split_dataset, Split, SplitFractions};
use trawl_core::evaluation::{save_detections, ImageDetection};
use trawl_core::stream::{emit_timeseries, run_stream, FrameSource, FrameStatus, PipelineConfig};
use trawl_core::synth::{perfect_detections, synthetic_manifest, write_noise_rasters};
use trawl_core::{Detection, ImageDims};

fn dims(w: u32, h: u32) -> ImageDims {
    ImageDims::new(w, h).unwrap()
}

fn small_config(batch_size: usize) -> PipelineConfig {
    PipelineConfig {
        batch_size,
        resize_to: dims(64, 64),
        ..PipelineConfig::default()
    }
}

#[test]
fn augment_zero_copies_is_identity() {
    let manifest = synthetic_manifest("id", 5, dims(8, 8), 2, 1);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 2).unwrap();
    let spec = AugmentSpec {
        copies_per_image: 0,
        ..AugmentSpec::default()
    };
    let out = augment_dataset(&manifest, dir.path(), &spec).unwrap();
    assert_eq!(out.manifest, manifest);
    assert!(out.provenance.is_empty());
}

#[test]
fn augment_skips_val_and_test_splits() {
    let manifest = synthetic_manifest("splits", 10, dims(8, 8), 2, 3);
    let manifest = split_dataset(&manifest, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 5);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 4).unwrap();
    let out = augment_dataset(&manifest, dir.path(), &AugmentSpec::default()).unwrap();

    // 6 train images gain 2 copies each; val/test stay untouched.
    assert_eq!(out.manifest.images.len(), 10 + 6 * 2);
    for record in &out.provenance {
        let source = out
            .manifest
            .images
            .iter()
            .find(|i| i.image_id == record.source_id)
            .unwrap();
        assert_eq!(source.split, Some(Split::Train));
    }
    out.manifest.validate().unwrap();
}

#[test]
fn augment_flipped_copies_get_flipped_boxes() {
    let manifest = synthetic_manifest("flips", 30, dims(8, 8), 1, 7);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 8).unwrap();
    let spec = AugmentSpec {
        flip_h_prob: 1.0,
        ..AugmentSpec::default()
    };
    let out = augment_dataset(&manifest, dir.path(), &spec).unwrap();
    for record in &out.provenance {
        assert!(record.flip_h);
        let source = manifest
            .images
            .iter()
            .find(|i| i.image_id == record.source_id)
            .unwrap();
        let copy = out
            .manifest
            .images
            .iter()
            .find(|i| i.image_id == record.id)
            .unwrap();
        let expected = source.truths[0].bbox.flip_h();
        assert_eq!(copy.truths[0].bbox, expected);
    }
}

#[test]
fn augment_rejects_missing_rasters_and_aug_ids() {
    let manifest = synthetic_manifest("missing", 3, dims(8, 8), 1, 9);
    let dir = tempfile::tempdir().unwrap();
    // No rasters written.
    assert!(augment_dataset(&manifest, dir.path(), &AugmentSpec::default()).is_err());

    let mut tagged = manifest.clone();
    tagged.images[0].image_id = "img#aug1".into();
    write_noise_rasters(&tagged, dir.path(), 9).unwrap();
    let err = augment_dataset(&tagged, dir.path(), &AugmentSpec::default()).unwrap_err();
    assert!(err.to_string().contains("#aug"), "{err}");
}

#[test]
fn stream_counts_frames_with_plastic_from_replay_file() {
    let manifest = synthetic_manifest("quant", 100, dims(16, 16), 1, 11);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 12).unwrap();

    // Stored detections for only the first 40 images; two per image, one of
    // them below the 0.5 operating threshold.
    let mut dets: Vec<ImageDetection> = Vec::new();
    for image in manifest.images.iter().take(40) {
        let bbox = image.truths[0].bbox;
        dets.push(ImageDetection::new(
            image.image_id.clone(),
            Detection {
                bbox,
                class_id: 0,
                score: 0.9,
            },
        ));
        dets.push(ImageDetection::new(
            image.image_id.clone(),
            Detection {
                bbox,
                class_id: 0,
                score: 0.3,
            },
        ));
    }

    let mut backend = ReplayBackend::from_detections(dets);
    let source = FrameSource::from_manifest(&manifest, dir.path());
    let out = run_stream(&source, &mut backend, &small_config(32)).unwrap();

    assert_eq!(out.records.len(), 100);
    assert_eq!(out.summary.frames_with_plastic, 40);
    assert_eq!(out.summary.total_detections, 40); // sub-threshold ones dropped
    assert_eq!(*out.summary.cumulative.last().unwrap(), 40);
    assert_eq!(backend.miss_count(), 60);
}

#[test]
fn stream_summary_invariant_to_batch_size() {
    let manifest = synthetic_manifest("batches", 50, dims(16, 16), 2, 13);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 14).unwrap();
    let dets = perfect_detections(&manifest, 0.9);
    let source = FrameSource::from_manifest(&manifest, dir.path());

    let run = |batch: usize| {
        let mut backend = ReplayBackend::from_detections(dets.clone());
        run_stream(&source, &mut backend, &small_config(batch)).unwrap()
    };
    let a = run(1);
    let b = run(32);
    assert_eq!(a.summary, b.summary);
    // Zero-delay replay still yields finite positive stats.
    let mean = b.stats.mean_ms_per_img.unwrap();
    assert!(mean > 0.0 && mean.is_finite());
    assert!(b.stats.p50_ms.unwrap() <= b.stats.p95_ms.unwrap());
}

#[test]
fn stream_records_failed_frames_and_continues() {
    let manifest = synthetic_manifest("bad", 6, dims(16, 16), 1, 15);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 16).unwrap();
    // Corrupt one frame's file.
    std::fs::write(dir.path().join(&manifest.images[2].path), b"P6 garbage").unwrap();

    let mut backend = ReplayBackend::from_detections(perfect_detections(&manifest, 0.9));
    let source = FrameSource::from_manifest(&manifest, dir.path());
    let out = run_stream(&source, &mut backend, &small_config(4)).unwrap();

    assert_eq!(out.records.len(), 6);
    assert!(matches!(out.records[2].status, FrameStatus::Failed(_)));
    assert_eq!(out.stats.failed_frames, 1);
    assert!(out.session_error.is_none());

    let csv = emit_timeseries(&out.records);
    let failed_row = csv.lines().nth(3).unwrap();
    assert!(failed_row.ends_with(",failed"), "{failed_row}");
    // Frame ids ascend and successful totals dominate preprocessing.
    for record in &out.records {
        assert!(record.total_ms >= record.preprocess_ms);
    }
}

#[test]
fn stream_empty_source_yields_empty_stats() {
    let source = FrameSource::from_specs(vec![]);
    let mut backend = ReplayBackend::from_detections(vec![]);
    let out = run_stream(&source, &mut backend, &small_config(32)).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.stats.frames, 0);
    assert_eq!(out.stats.mean_ms_per_img, None);
    assert_eq!(out.stats.throughput_fps, None);
    assert_eq!(out.summary.total_detections, 0);
}

#[test]
fn stream_survives_backend_session_loss_with_partial_results() {
    let manifest = synthetic_manifest("loss", 12, dims(16, 16), 1, 17);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 18).unwrap();

    // Echo server dies after 9 responses; with batch size 4 batches 0 and 1
    // complete, batch 2 fails mid-flight and is recorded as failed.
    let (addr, server) = spawn_echo_server(EchoConfig {
        close_after: Some(9),
        ..EchoConfig::default()
    });
    let mut backend = ExternalBackend::connect(
        &BackendEndpoint::Tcp(addr),
        ExternalConfig {
            timeout: Duration::from_secs(2),
            window: 4,
        },
    )
    .unwrap();
    let source = FrameSource::from_manifest(&manifest, dir.path());
    let out = run_stream(&source, &mut backend, &small_config(4)).unwrap();

    assert!(out.session_error.is_some());
    let ok_count = out
        .records
        .iter()
        .filter(|r| r.status == FrameStatus::Ok)
        .count();
    assert_eq!(ok_count, 8, "two full batches succeeded");
    assert_eq!(out.records.len(), 12, "failed batch still recorded");
    drop(backend);
    server.join().unwrap();
}

#[test]
fn frame_sources_from_dir_and_list() {
    let manifest = synthetic_manifest("src", 4, dims(8, 8), 1, 19);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 20).unwrap();

    let from_dir = FrameSource::from_dir(dir.path()).unwrap();
    assert_eq!(from_dir.frames.len(), 4);
    assert!(from_dir.frames.windows(2).all(|w| w[0].path < w[1].path));
    assert_eq!(from_dir.frames[0].image_id, "img_0000");

    let list = dir.path().join("frames.txt");
    std::fs::write(&list, "img_0002.ppm\nimg_0000.ppm\n\n").unwrap();
    let from_list = FrameSource::from_list_file(&list).unwrap();
    assert_eq!(from_list.frames.len(), 2);
    assert_eq!(from_list.frames[0].image_id, "img_0002");
    assert!(from_list.frames[0].path.ends_with("img_0002.ppm"));
}

#[test]
fn external_backend_spools_inline_rasters() {
    // The echo detector answers every request, so a stream pushing inline
    // rasters through the wire protocol proves the spooling path.
    let manifest = synthetic_manifest("spool", 5, dims(16, 16), 1, 23);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 24).unwrap();
    let (addr, server) = spawn_echo_server(EchoConfig::default());
    let mut backend =
        ExternalBackend::connect(&BackendEndpoint::Tcp(addr), ExternalConfig::default()).unwrap();
    let source = FrameSource::from_manifest(&manifest, dir.path());
    let out = run_stream(&source, &mut backend, &small_config(4)).unwrap();
    assert!(out.session_error.is_none());
    assert_eq!(out.records.len(), 5);
    assert!(out.records.iter().all(|r| r.status == FrameStatus::Ok));
    drop(backend);
    server.join().unwrap();
}

#[test]
fn replay_file_round_trips_through_disk() {
    let manifest = synthetic_manifest("disk", 3, dims(16, 16), 1, 25);
    let dets = perfect_detections(&manifest, 0.8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dets.jsonl");
    std::fs::write(&path, save_detections(&dets)).unwrap();
    let backend = ReplayBackend::from_file(&path).unwrap();
    assert_eq!(backend.miss_count(), 0);

    let missing = dir.path().join("nope.jsonl");
    assert!(ReplayBackend::from_file(&missing).is_err());
}

#[test]
fn manifest_of_3200_images_loads_quickly() {
    let manifest = synthetic_manifest("big", 3200, dims(416, 416), 3, 27);
    let text = save_manifest(&manifest).unwrap();
    let started = std::time::Instant::now();
    let loaded = load_manifest(&text, true).unwrap();
    let elapsed = started.elapsed();
    assert_eq!(loaded.images.len(), 3200);
    assert!(
        elapsed < Duration::from_secs(1),
        "manifest load took {elapsed:?}"
    );
}

#[test]
fn backend_warning_counter_reflects_misses_only() {
    let manifest = synthetic_manifest("warn", 4, dims(8, 8), 1, 29);
    let mut ids: HashSet<String> = manifest.images.iter().map(|i| i.image_id.clone()).collect();
    let dets = perfect_detections(&manifest, 0.9);
    let dir = tempfile::tempdir().unwrap();
    write_noise_rasters(&manifest, dir.path(), 30).unwrap();

    let mut backend = ReplayBackend::from_detections(dets);
    let source = FrameSource::from_manifest(&manifest, dir.path());
    let out = run_stream(&source, &mut backend, &small_config(2)).unwrap();
    assert_eq!(backend.miss_count(), 0);
    for record in &out.records {
        assert!(ids.remove(&record.image_id));
    }
    assert!(ids.is_empty());
}
