//! Property tests for invariants that hold over whole input spaces.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use trawl_core::dataset::{
    load_manifest, parse_darknet_labels, save_manifest, split_dataset, write_darknet_labels,
    AnnotatedImage, DatasetManifest, Detection, GroundTruth, Split, SplitFractions,
};
use trawl_core::evaluation::{
    average_precision, confusion_at, f1_score, pr_curve, precision_recall, ApMode, ImageDetection,
};
use trawl_core::geometry::Orientation;
use trawl_core::{BBox, ImageDims};

prop_compose! {
    /// A valid box with sides of at least `min_side`.
    fn arb_box(min_side: f64)
        (w in min_side..0.6, h in min_side..0.6, xf in 0.0..1.0f64, yf in 0.0..1.0f64)
        -> BBox
    {
        let x0 = xf * (1.0 - w);
        let y0 = yf * (1.0 - h);
        BBox::new(x0, y0, x0 + w, y0 + h).unwrap()
    }
}

prop_compose! {
    fn arb_truth()(bbox in arb_box(0.01), class_id in 0u32..3) -> GroundTruth {
        GroundTruth { bbox, class_id }
    }
}

proptest! {
    #[test]
    fn iou_symmetric_bounded_reflexive(a in arb_box(0.001), b in arb_box(0.001)) {
        let ab = a.iou(&b);
        prop_assert_eq!(ab, b.iou(&a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn pixel_round_trip_below_1e9(
        b in arb_box(0.001),
        w in 1u32..5000,
        h in 1u32..5000,
    ) {
        let dims = ImageDims::new(w, h).unwrap();
        let back = b.to_pixel(dims).to_normalized(dims).unwrap();
        prop_assert!((back.x_min() - b.x_min()).abs() < 1e-9);
        prop_assert!((back.y_min() - b.y_min()).abs() < 1e-9);
        prop_assert!((back.x_max() - b.x_max()).abs() < 1e-9);
        prop_assert!((back.y_max() - b.y_max()).abs() < 1e-9);
    }

    #[test]
    fn flips_involute_and_preserve_area(b in arb_box(0.001)) {
        let hh = b.flip_h().flip_h();
        let vv = b.flip_v().flip_v();
        prop_assert!((hh.x_min() - b.x_min()).abs() <= 1e-15);
        prop_assert!((hh.x_max() - b.x_max()).abs() <= 1e-15);
        prop_assert!((vv.y_min() - b.y_min()).abs() <= 1e-15);
        prop_assert!((vv.y_max() - b.y_max()).abs() <= 1e-15);
        prop_assert!((b.flip_h().area() - b.area()).abs() <= 1e-15);
        prop_assert!((b.flip_v().area() - b.area()).abs() <= 1e-15);
    }

    #[test]
    fn orientation_remaps_invert_and_preserve_area(b in arb_box(0.001)) {
        for o in Orientation::ALL {
            let forward = b.remap_orientation(o);
            prop_assert!((forward.area() - b.area()).abs() <= 1e-15);
            let back = forward.remap_orientation(o.inverse());
            prop_assert!((back.x_min() - b.x_min()).abs() <= 1e-15);
            prop_assert!((back.y_min() - b.y_min()).abs() <= 1e-15);
            prop_assert!((back.x_max() - b.x_max()).abs() <= 1e-15);
            prop_assert!((back.y_max() - b.y_max()).abs() <= 1e-15);
        }
        prop_assert_eq!(b.remap_orientation(Orientation::Upright), b);
    }

    #[test]
    fn darknet_round_trip_within_1e6(truths in prop::collection::vec(arb_truth(), 0..20)) {
        let text = write_darknet_labels(&truths);
        let parsed = parse_darknet_labels(&text).unwrap();
        prop_assert_eq!(parsed.len(), truths.len());
        for (a, b) in truths.iter().zip(&parsed) {
            prop_assert_eq!(a.class_id, b.class_id);
            // Writing quantizes center-form fields to 1e-6; corner-form
            // drift stays within 1e-6 plus f64 noise on the numerals.
            prop_assert!((a.bbox.x_min() - b.bbox.x_min()).abs() <= 1e-6 + 1e-12);
            prop_assert!((a.bbox.y_min() - b.bbox.y_min()).abs() <= 1e-6 + 1e-12);
            prop_assert!((a.bbox.x_max() - b.bbox.x_max()).abs() <= 1e-6 + 1e-12);
            prop_assert!((a.bbox.y_max() - b.bbox.y_max()).abs() <= 1e-6 + 1e-12);
        }
    }

    #[test]
    fn manifest_round_trip_is_stable(
        images in prop::collection::vec(
            (prop::collection::vec(arb_truth(), 0..5), 1u32..2000, 1u32..2000, 1u8..=8),
            0..10,
        ),
        strict in any::<bool>(),
    ) {
        let manifest = DatasetManifest {
            name: "prop".into(),
            classes: vec!["a".into(), "b".into(), "c".into()],
            images: images
                .into_iter()
                .enumerate()
                .map(|(i, (truths, w, h, code))| AnnotatedImage {
                    image_id: format!("img{i}"),
                    path: format!("img{i}.ppm"),
                    dims: ImageDims::new(w, h).unwrap(),
                    orientation: Orientation::from_code(code).unwrap(),
                    truths,
                    split: None,
                })
                .collect(),
        };
        let text = save_manifest(&manifest).unwrap();
        let loaded = load_manifest(&text, strict).unwrap();
        // One quantization pass, then bytes are fixed.
        let second = save_manifest(&loaded).unwrap();
        prop_assert_eq!(&text, &second);
        let third = save_manifest(&load_manifest(&second, strict).unwrap()).unwrap();
        prop_assert_eq!(&second, &third);
    }

    #[test]
    fn split_is_exhaustive_disjoint_and_deterministic(
        n in 0usize..200,
        seed in any::<u64>(),
        t in 0u32..=10,
        v in 0u32..=10,
    ) {
        // Normalize a random nonnegative triple into fractions.
        let (t, v) = (f64::from(t), f64::from(v));
        let total = t + v + 1.0;
        let fractions = SplitFractions::new(t / total, v / total, 1.0 - t / total - v / total).unwrap();

        let mut manifest = DatasetManifest::new("prop", vec!["c".into()]);
        for i in 0..n {
            manifest.images.push(AnnotatedImage {
                image_id: format!("img{i}"),
                path: format!("img{i}.ppm"),
                dims: ImageDims::new(16, 16).unwrap(),
                orientation: Orientation::Upright,
                truths: vec![],
                split: None,
            });
        }
        let out = split_dataset(&manifest, fractions, seed);
        prop_assert!(out.images.iter().all(|i| i.split.is_some()));
        prop_assert_eq!(out.images.len(), n);
        let again = split_dataset(&manifest, fractions, seed);
        prop_assert_eq!(out, again);
    }

    #[test]
    fn confusion_satisfies_truth_conservation(
        dets in prop::collection::vec((arb_box(0.01), 0.0..=1.0f64), 0..15),
        truths in prop::collection::vec(arb_truth(), 0..10),
        conf in 0.0..=1.0f64,
    ) {
        let dets: Vec<Detection> = dets
            .into_iter()
            .map(|(bbox, score)| Detection { bbox, class_id: 0, score })
            .collect();
        let c = confusion_at(&dets, &truths, 0.5, conf);
        prop_assert_eq!(c.tp + c.fn_, truths.len());
        prop_assert!(c.tp + c.fp <= dets.len());
        let (p, r) = precision_recall(c);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn f1_symmetric_and_bounded(p in 0.0..=1.0f64, r in 0.0..=1.0f64) {
        let f = f1_score(p, r);
        prop_assert_eq!(f, f1_score(r, p));
        prop_assert!(f <= 2.0 * p.min(r) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn detection_order_does_not_matter(
        seed_dets in prop::collection::vec((arb_box(0.05), 0u32..1_000_000), 1..12),
        truths in prop::collection::vec(arb_truth(), 1..8),
        rotate_by in 0usize..12,
    ) {
        // Distinct scores via distinct integers; ordering must not matter.
        let mut seen = std::collections::HashSet::new();
        let dets: Vec<ImageDetection> = seed_dets
            .into_iter()
            .enumerate()
            .filter(|(_, (_, grid))| seen.insert(*grid))
            .map(|(i, (bbox, grid))| {
                ImageDetection::new(
                    format!("img{}", i % 2),
                    Detection { bbox, class_id: 0, score: f64::from(grid) / 1e6 },
                )
            })
            .collect();
        let truths_by_image: BTreeMap<String, Vec<GroundTruth>> = [
            ("img0".to_string(), truths.clone()),
            ("img1".to_string(), truths),
        ]
        .into_iter()
        .collect();

        let ap = |dets: &[ImageDetection]| {
            let curve = pr_curve(dets, &truths_by_image, 0.5).unwrap();
            average_precision(&curve, ApMode::Continuous).unwrap()
        };
        let baseline = ap(&dets);
        let mut rotated = dets.clone();
        let pivot = rotate_by % rotated.len().max(1);
        rotated.rotate_left(pivot);
        prop_assert_eq!(baseline, ap(&rotated));

        // AP never exceeds the maximum attained precision.
        let curve = pr_curve(&dets, &truths_by_image, 0.5).unwrap();
        let max_precision = curve
            .points
            .iter()
            .map(|p| p.precision)
            .fold(0.0f64, f64::max);
        prop_assert!(baseline <= max_precision + 1e-12);
    }
}

#[test]
fn split_counts_match_rounded_fractions_with_remainder_to_train() {
    let mut manifest = DatasetManifest::new("s", vec!["c".into()]);
    for i in 0..103 {
        manifest.images.push(AnnotatedImage {
            image_id: format!("img{i}"),
            path: format!("img{i}.ppm"),
            dims: ImageDims::new(16, 16).unwrap(),
            orientation: Orientation::Upright,
            truths: vec![],
            split: None,
        });
    }
    let out = split_dataset(&manifest, SplitFractions::new(0.8, 0.1, 0.1).unwrap(), 11);
    let count = |s: Split| out.split_images(s).count();
    assert_eq!(count(Split::Val), 10); // round(10.3)
    assert_eq!(count(Split::Test), 10);
    assert_eq!(count(Split::Train), 83); // remainder
}
