//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use motionbox_core::ablation::method;
use motionbox_core::appearance::{bayes_posterior, location_probability_map, masked_histogram};
use motionbox_core::boxopt::{initial_box, optimize_box, score, TargetMap};
use motionbox_core::dataset::{build_pairs_seeded, SequenceManifest};
use motionbox_core::eval::{center_error, evaluate_with, iou, precision_curve, success_curve};
use motionbox_core::features::RawFeatures;
use motionbox_core::motion::binarize;
use motionbox_core::trackassist::{assist_refine, AssistState};
use motionbox_core::{
    box_sum, integral_image, Bbox, DetectOptions, Detector, DetectorConfig, Grid, Mask, MotionCenter, ProbabilityMap,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::patch_fixture;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Plain double loop over the rounded pixel rectangle.
fn direct_sum(grid: &Grid<f64>, x0: usize, y0: usize, w: usize, h: usize) -> f64 {
    let mut s = 0.0;
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            s += grid.get(x, y);
        }
    }
    s
}

fn integral_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(1..=64usize), rng.gen_range(1..=64usize));
        let grid = Grid::from_fn(w, h, |_, _| rng.gen_range(0..=16u32) as f64 / 16.0);
        let map = ProbabilityMap::try_new(grid.clone()).map_err(|e| e.to_string())?;
        let ii = integral_image(&map);
        for _ in 0..100 {
            let x0 = rng.gen_range(0..w);
            let y0 = rng.gen_range(0..h);
            let bw = rng.gen_range(1..=w - x0);
            let bh = rng.gen_range(1..=h - y0);
            let b = Bbox::from_corner(x0 as f64, y0 as f64, bw as f64, bh as f64);
            let got = box_sum(&ii, &b).map_err(|e| e.to_string())?;
            let want = direct_sum(&grid, x0, y0, bw, bh);
            ensure(got == want, || format!("{b:?} on {w}x{h}: {got} != {want}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} boxes exact"))
}

fn bayes_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let (w, h) = (rng.gen_range(4..=48u32), rng.gen_range(4..=48u32));
        let levels = rng.gen_range(2..=256u32);
        let img = image::RgbImage::from_fn(w, h, |_, _| {
            let mut c = || (rng.gen_range(0..levels) * 255 / (levels - 1).max(1)) as u8;
            image::Rgb([c(), c(), c()])
        });
        let density = rng.gen_range(0.02..0.9);
        let mut mask = Mask::from_fn(w as usize, h as usize, |_, _| rng.gen_bool(density));
        if mask.count_set() == 0 {
            mask.set(0, 0, true);
        }
        let full = masked_histogram(&img, None, 16).map_err(|e| e.to_string())?;
        let mot = masked_histogram(&img, Some(&mask), 16).map_err(|e| e.to_string())?;
        let post = bayes_posterior(&mot, &full).map_err(|e| e.to_string())?;
        for (bin, &p) in post.probabilities().iter().enumerate() {
            ensure((0.0..=1.0).contains(&p), || format!("case {case} bin {bin}: {p} outside [0,1]"))?;
            let f = full.counts()[bin];
            let want = if f == 0 { 0.0 } else { mot.counts()[bin] as f64 / f as f64 };
            let d = (p - want).abs();
            worst = worst.max(d);
            ensure(d <= 1e-12, || format!("case {case} bin {bin}: {p} vs {want}"))?;
        }
    }
    Ok(format!("max deviation {worst:.1e}"))
}

fn binarize_scale_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..50 {
        let (w, h) = (rng.gen_range(1..=40usize), rng.gen_range(1..=40usize));
        let grid = Grid::from_fn(w, h, |_, _| rng.gen_range(0.0..5.0));
        let base = binarize(&grid, 0.8);
        for k in [0.1, 3.0, 1000.0] {
            let scaled = binarize(&grid.map(|v| v * k), 0.8);
            ensure(scaled == base, || format!("case {case}: mask changed under k = {k}"))?;
        }
    }
    Ok("50 maps, 3 scales".into())
}

fn gaussian_prior() -> Check {
    let (w, h) = (100usize, 60usize);
    let center = MotionCenter { x: 40.0, y: 25.0 };
    let map = location_probability_map(center, w, h, 0.2);
    let (sx, sy) = (20usize, 12usize);
    ensure(map.get(40, 25) == 1.0, || format!("peak {}", map.get(40, 25)))?;
    let target = (-0.5f64).exp();
    for (x, y) in [(40 + sx, 25), (40 - sx, 25), (40, 25 + sy), (40, 25 - sy)] {
        let v = map.get(x, y);
        ensure((v - target).abs() <= 1e-9, || format!("one-sigma value at ({x},{y}) = {v}"))?;
    }
    for y in 0..h {
        for x in 0..w {
            let v = map.get(x, y);
            if x + 1 < w {
                let n = map.get(x + 1, y);
                let ok = if (x as f64) < center.x { n >= v } else { n <= v };
                ensure(ok, || format!("row {y} not monotone at x = {x}"))?;
            }
            if y + 1 < h {
                let n = map.get(x, y + 1);
                let ok = if (y as f64) < center.y { n >= v } else { n <= v };
                ensure(ok, || format!("column {x} not monotone at y = {y}"))?;
            }
        }
    }
    Ok("peak, one-sigma and monotonicity hold".into())
}

/// Best integer box by exhaustive enumeration over a prefix-sum table; ties
/// on mean go to the larger area.
fn exhaustive_best(grid: &Grid<f64>) -> Bbox {
    let (w, h) = grid.dims();
    let mut table = vec![0.0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            table[(y + 1) * (w + 1) + x + 1] =
                grid.get(x, y) + table[y * (w + 1) + x + 1] + table[(y + 1) * (w + 1) + x] - table[y * (w + 1) + x];
        }
    }
    let s = |x0: usize, y0: usize, x1: usize, y1: usize| {
        table[y1 * (w + 1) + x1] - table[y0 * (w + 1) + x1] - table[y1 * (w + 1) + x0] + table[y0 * (w + 1) + x0]
    };
    let mut best = (f64::NEG_INFINITY, 0usize, Bbox::new(0.0, 0.0, 1.0, 1.0));
    for y0 in 0..h {
        for y1 in y0 + 1..=h {
            for x0 in 0..w {
                for x1 in x0 + 1..=w {
                    let area = (x1 - x0) * (y1 - y0);
                    let mean = s(x0, y0, x1, y1) / area as f64;
                    if mean > best.0 || (mean == best.0 && area > best.1) {
                        let b = Bbox::from_corner(x0 as f64, y0 as f64, (x1 - x0) as f64, (y1 - y0) as f64);
                        best = (mean, area, b);
                    }
                }
            }
        }
    }
    best.2
}

fn optimizer_vs_exhaustive() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = DetectorConfig {
        penalty_lambda: 0.0,
        ..DetectorConfig::default()
    };
    let mut good = 0;
    let mut ious = Vec::new();
    for case in 0..20 {
        let (rw, rh) = (rng.gen_range(8..=32usize), rng.gen_range(8..=32usize));
        let (x0, y0) = (rng.gen_range(0..=64 - rw), rng.gen_range(0..=64 - rh));
        let grid = Grid::from_fn(64, 64, |x, y| {
            if (x0..x0 + rw).contains(&x) && (y0..y0 + rh).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let oracle = exhaustive_best(&grid);
        let target = TargetMap::new(ProbabilityMap::try_new(grid).map_err(|e| e.to_string())?);
        // motion center near the rectangle center, N = its area
        let center = MotionCenter {
            x: (x0 as f64 + rw as f64 / 2.0 + rng.gen_range(-2.0..=2.0)).round(),
            y: (y0 as f64 + rh as f64 / 2.0 + rng.gen_range(-2.0..=2.0)).round(),
        };
        let init = initial_box(center, rw * rh, 64, 64).map_err(|e| e.to_string())?;
        let (result, _) = optimize_box(&target, &init, &cfg).map_err(|e| e.to_string())?;
        let s_init = score(&target, &init, 0.0).map_err(|e| e.to_string())?;
        let s_out = score(&target, &result, 0.0).map_err(|e| e.to_string())?;
        ensure(s_out >= s_init, || format!("case {case}: score fell {s_init} -> {s_out}"))?;
        let v = iou(&result, &oracle).map_err(|e| e.to_string())?;
        ious.push(v);
        if v >= 0.8 {
            good += 1;
        }
    }
    let listing: Vec<String> = ious.iter().map(|v| format!("{v:.2}")).collect();
    ensure(good >= 18, || format!("{good}/20 with IOU >= 0.8 [{}]", listing.join(" ")))?;
    Ok(format!("{good}/20 with IOU >= 0.8, scores never fell"))
}

fn synthetic_detection() -> Check {
    let detector = Detector::new(Arc::new(RawFeatures), DetectorConfig::default()).map_err(|e| e.to_string())?;
    let mut good = 0;
    let mut ious = Vec::new();
    for seed in 0..10 {
        let fx = patch_fixture(100 + seed);
        let det = detector.detect(&fx.frame1, &fx.frame2).map_err(|e| format!("fixture {seed}: {e}"))?;
        let v = iou(&det.bbox, &fx.truth).map_err(|e| e.to_string())?;
        ious.push(format!("{v:.2}"));
        if v >= 0.5 {
            good += 1;
        }
    }
    let fx = patch_fixture(100);
    let err = detector
        .detect(&fx.frame1, &fx.frame1)
        .err()
        .ok_or("identical frames produced a detection")?;
    ensure(err.is_no_motion(), || format!("identical frames: unexpected error {err}"))?;
    ensure(good >= 8, || format!("{good}/10 with IOU >= 0.5 [{}]", ious.join(" ")))?;
    Ok(format!("{good}/10 with IOU >= 0.5 [{}], identical frames -> no motion", ious.join(" ")))
}

fn metrics() -> Check {
    let a = Bbox::from_corner(0.0, 0.0, 2.0, 1.0);
    let cases = [
        (a, a, 1.0),
        (a, Bbox::from_corner(5.0, 5.0, 2.0, 1.0), 0.0),
        (a, Bbox::from_corner(1.0, 0.0, 2.0, 1.0), 1.0 / 3.0),
    ];
    for (p, q, want) in cases {
        let got = iou(&p, &q).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("iou({p:?}, {q:?}) = {got}, want {want}"))?;
    }
    let e = center_error(&Bbox::new(0.0, 0.0, 2.0, 2.0), &Bbox::new(3.0, 4.0, 2.0, 2.0));
    ensure(e == 5.0, || format!("center error {e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.gen_range(1..200);
        let ious: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let errs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..80.0)).collect();
        let s = success_curve(&ious);
        let p = precision_curve(&errs);
        ensure(s.windows(2).all(|w| w[1].1 <= w[0].1), || "success curve increases".into())?;
        ensure(p.windows(2).all(|w| w[1].1 >= w[0].1), || "precision curve decreases".into())?;
    }

    let pairs: Vec<_> = (0..20u64)
        .map(|i| {
            let truth = patch_fixture(i).truth;
            motionbox_core::dataset::PairRecord {
                sequence: format!("sanity{i}"),
                index_a: 1,
                index_b: 2,
                ground_truth: truth,
                path_a: PathBuf::from("a.png"),
                path_b: PathBuf::from("b.png"),
            }
        })
        .collect();
    let result = evaluate_with(&pairs, 2, |p| Ok(p.ground_truth)).map_err(|e| e.to_string())?;
    ensure(result.auc >= 0.99, || format!("perfect detector AUC {}", result.auc))?;
    ensure(result.pre30 == 1.0, || format!("perfect detector PRE(30) {}", result.pre30))?;
    Ok(format!("IOU/center examples exact, perfect detector AUC {:.4}", result.auc))
}

fn dataset_builder() -> Check {
    let manifest = SequenceManifest {
        name: "synthetic".into(),
        frame_paths: (1..=200).map(|i| PathBuf::from(format!("img/{i:04}.jpg"))).collect(),
        annotations: (0..200).map(|i| Bbox::from_corner(i as f64 % 50.0, 10.0, 20.0, 20.0)).collect(),
        excluded: None,
    };
    let first = build_pairs_seeded(&manifest, 42).map_err(|e| e.to_string())?;
    let second = build_pairs_seeded(&manifest, 42).map_err(|e| e.to_string())?;
    let anchors: BTreeSet<usize> = first.iter().map(|p| p.index_a).collect();
    ensure(anchors == BTreeSet::from([1, 51, 101, 151]), || format!("anchors {anchors:?}"))?;
    for p in &first {
        let d = p.index_b - p.index_a;
        ensure((1..=10).contains(&d), || format!("interval {d} in {}", p.id()))?;
    }
    let (a, b) = (
        serde_json::to_vec(&first).map_err(|e| e.to_string())?,
        serde_json::to_vec(&second).map_err(|e| e.to_string())?,
    );
    ensure(a == b, || "same seed gave different pairs".into())?;
    let intervals: Vec<usize> = first.iter().map(|p| p.index_b - p.index_a).collect();
    Ok(format!("anchors {{1,51,101,151}}, intervals {intervals:?}, reproducible"))
}

fn ablation_identities() -> Check {
    let cfg = DetectorConfig::default();
    let full = Detector::new(Arc::new(RawFeatures), cfg.clone()).map_err(|e| e.to_string())?;
    let m10 = full.clone().with_options(method(10).map_err(|e| e.to_string())?.detect_options());
    let m7 = full.clone().with_options(method(7).map_err(|e| e.to_string())?.detect_options());
    assert_eq!(full.options(), DetectOptions::default());
    for seed in 0..5 {
        let fx = patch_fixture(300 + seed);
        let reference = full.detect(&fx.frame1, &fx.frame2).map_err(|e| e.to_string())?;
        let ablated = m10.detect(&fx.frame1, &fx.frame2).map_err(|e| e.to_string())?;
        let (a, b) = (ablated.bbox, reference.diagnostics.initial_box);
        let same = [a.x, a.y, a.w, a.h]
            .iter()
            .zip([b.x, b.y, b.w, b.h])
            .all(|(p, q)| p.to_bits() == q.to_bits());
        ensure(same, || format!("fixture {seed}: method 10 {a:?} vs initial box {b:?}"))?;

        let seven = m7.detect(&fx.frame1, &fx.frame2).map_err(|e| e.to_string())?;
        let values = seven.diagnostics.target.map().values();
        ensure(values.iter().all(|&v| v == 0.0 || v == 1.0), || {
            format!("fixture {seed}: method 7 target map not binary")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let backend = RawFeatures;
    for call in 0..100 {
        let fx = patch_fixture(400 + call % 10);
        let state = AssistState::new(fx.frame1.image(), fx.start, &cfg).map_err(|e| e.to_string())?;
        let region = state.search_region;
        let w = rng.gen_range(4.0..=region.w.min(40.0));
        let h = rng.gen_range(4.0..=region.h.min(40.0));
        let x = rng.gen_range(region.left() + w / 2.0..=region.right() - w / 2.0);
        let y = rng.gen_range(region.top() + h / 2.0..=region.bottom() - h / 2.0);
        let tracker = Bbox::new(x, y, w, h);
        let out = assist_refine(fx.frame1.image(), fx.frame2.image(), &state, &tracker, &backend, &cfg)
            .map_err(|e| e.to_string())?;
        ensure(out.w.to_bits() == w.to_bits() && out.h.to_bits() == h.to_bits(), || {
            format!("call {call}: size {w}x{h} became {}x{}", out.w, out.h)
        })?;
    }
    Ok("method 10 = initial box, method 7 binary, assist kept w,h in 100 calls".into())
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Check); 9] = [
        (1, "integral-image oracle", 1, integral_oracle),
        (2, "Bayes ratio identity", 5, bayes_identity),
        (3, "binarization scale invariance", 1, binarize_scale_invariance),
        (4, "Gaussian location prior", 1, gaussian_prior),
        (5, "box optimizer vs exhaustive oracle", 60, optimizer_vs_exhaustive),
        (6, "end-to-end synthetic detection", 30, synthetic_detection),
        (7, "IOU and curve metrics", 5, metrics),
        (8, "dataset builder", 1, dataset_builder),
        (9, "ablation plumbing identities", 10, ablation_identities),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(limit) => {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit} s"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {id} PASS {name} ({elapsed:.2?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL {name} ({elapsed:.2?}): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
