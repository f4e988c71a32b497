mod common;

use std::sync::Arc;

use common::{paint, patch_fixture, textured_background, PATCH_COLOR};
use image::{imageops, RgbImage};
use motionbox_core::ablation::method;
use motionbox_core::eval::iou;
use motionbox_core::features::{HogFeatures, RawFeatures};
use motionbox_core::{Detector, DetectorConfig, Error, FeatureExtractor, Frame, TargetSource};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn raw_detector() -> Detector {
    Detector::new(Arc::new(RawFeatures), DetectorConfig::default()).unwrap()
}

#[test]
fn moving_patch_is_found_with_raw_features() {
    let det = raw_detector();
    for seed in 0..4 {
        let fx = patch_fixture(seed);
        let d = det.detect(&fx.frame1, &fx.frame2).unwrap();
        let v = iou(&d.bbox, &fx.truth).unwrap();
        assert!(v >= 0.5, "seed {seed}: {:?} vs {:?} (iou {v})", d.bbox, fx.truth);
        assert!(d.bbox.pixel_rect().is_within(128, 128));
    }
}

#[test]
fn identical_frames_report_no_motion() {
    let fx = patch_fixture(3);
    let err = raw_detector().detect(&fx.frame2, &fx.frame2).unwrap_err();
    assert!(matches!(err, Error::NoMotion), "{err}");
}

#[test]
fn hog_backend_runs_end_to_end() {
    let det = Detector::new(Arc::new(HogFeatures::default()), DetectorConfig::default()).unwrap();
    let fx = patch_fixture(11);
    let d = det.detect(&fx.frame1, &fx.frame2).unwrap();
    assert!(d.bbox.is_valid());
    assert_eq!(d.diagnostics.differences[0].stride, 8);
    assert!(d.diagnostics.motion.frame_mask.count_set() > 0);
}

#[test]
fn detection_is_deterministic() {
    let fx = patch_fixture(21);
    let a = raw_detector().detect(&fx.frame1, &fx.frame2).unwrap();
    let b = raw_detector().detect(&fx.frame1, &fx.frame2).unwrap();
    assert_eq!(a.bbox, b.bbox);
    assert_eq!(a.score.to_bits(), b.score.to_bits());
}

#[test]
fn diagnostics_hold_each_stage() {
    let fx = patch_fixture(5);
    let d = raw_detector().detect(&fx.frame1, &fx.frame2).unwrap();
    let diag = &d.diagnostics;
    assert!(diag.posterior.is_some() && diag.color_map.is_some() && diag.location_map.is_some());
    let trace = diag.trace.as_ref().unwrap();
    assert_eq!(trace.steps[0].bbox, diag.initial_box);
    // the magenta bin carries the highest posterior
    let post = diag.posterior.as_ref().unwrap();
    let magenta = post.probability_of(PATCH_COLOR);
    assert!(post.probabilities().iter().all(|&p| p <= magenta), "magenta {magenta}");
}

#[test]
fn method_nine_map_is_a_probability_map() {
    let fx = patch_fixture(8);
    let det = raw_detector().with_options(method(9).unwrap().detect_options());
    assert_eq!(det.options().target, TargetSource::DifferenceAndLocation);
    let d = det.detect(&fx.frame1, &fx.frame2).unwrap();
    let values = d.diagnostics.target.map().values();
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(values.iter().cloned().fold(0.0, f64::max) > 0.5);
}

#[test]
fn method_eight_uses_color_alone() {
    let fx = patch_fixture(9);
    let d = raw_detector()
        .with_options(method(8).unwrap().detect_options())
        .detect(&fx.frame1, &fx.frame2)
        .unwrap();
    assert!(d.diagnostics.location_map.is_none());
    assert_eq!(d.diagnostics.target.map(), d.diagnostics.color_map.as_ref().unwrap());
}

#[test]
fn fused_masks_cover_each_backend() {
    let fx = patch_fixture(13);
    let raw: Arc<dyn FeatureExtractor> = Arc::new(RawFeatures);
    let hog: Arc<dyn FeatureExtractor> = Arc::new(HogFeatures::default());
    let cfg = DetectorConfig::default();
    let single = |b: Arc<dyn FeatureExtractor>| {
        Detector::new(b, cfg.clone()).unwrap().detect(&fx.frame1, &fx.frame2).unwrap().diagnostics.motion
    };
    let (m_raw, m_hog) = (single(raw.clone()), single(hog.clone()));
    let fused = Detector::fused(vec![raw, hog], cfg.clone(), Default::default())
        .unwrap()
        .detect(&fx.frame1, &fx.frame2)
        .unwrap()
        .diagnostics
        .motion;
    let expected = m_raw.frame_mask.or(&m_hog.frame_mask).unwrap();
    assert_eq!(fused.frame_mask, expected);
    assert_eq!(fused.non_zero_count, expected.count_set());
}

fn mirror_pair(seed: u64) -> (Frame, Frame, Frame, Frame) {
    let fx = patch_fixture(seed);
    let flip = |f: &Frame| Frame::new(imageops::flip_horizontal(f.image())).unwrap();
    (fx.frame1.clone(), fx.frame2.clone(), flip(&fx.frame1), flip(&fx.frame2))
}

#[test]
fn detection_is_order_symmetric_in_the_mask() {
    let fx = patch_fixture(17);
    let det = raw_detector();
    let a = det.detect(&fx.frame1, &fx.frame2).unwrap();
    let b = det.detect(&fx.frame2, &fx.frame1).unwrap();
    assert_eq!(a.diagnostics.motion.frame_mask, b.diagnostics.motion.frame_mask);
}

#[test]
fn mirrored_inputs_mirror_the_motion_mask() {
    let (a1, a2, b1, b2) = mirror_pair(19);
    let det = raw_detector();
    let ma = det.detect(&a1, &a2).unwrap().diagnostics.motion.frame_mask;
    let mb = det.detect(&b1, &b2).unwrap().diagnostics.motion.frame_mask;
    let w = ma.width();
    for y in 0..ma.height() {
        for x in 0..w {
            assert_eq!(ma.get(x, y), mb.get(w - 1 - x, y));
        }
    }
}

#[test]
fn small_frame_is_rejected() {
    assert!(matches!(Frame::new(RgbImage::new(16, 64)), Err(Error::InvalidFrame(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn any_moving_patch_yields_a_valid_box(seed in 0u64..10_000, x1 in 10u32..80, y1 in 10u32..80,
                                           dx in 3u32..12, side in 12u32..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bg = textured_background(128, &mut rng);
        let (mut a, mut b) = (bg.clone(), bg);
        paint(&mut a, x1, y1, side, side, PATCH_COLOR);
        paint(&mut b, x1 + dx, y1, side, side, PATCH_COLOR);
        let d = raw_detector().detect(&Frame::new(a).unwrap(), &Frame::new(b).unwrap()).unwrap();
        prop_assert!(d.bbox.is_valid());
        prop_assert!(d.bbox.pixel_rect().is_within(128, 128));
        prop_assert!(d.score.is_finite());
    }
}
