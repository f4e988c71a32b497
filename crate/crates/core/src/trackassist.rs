//! Tracking assist: refine a tracker's box position with the target
//! probability map computed inside the tracker's search region, using the
//! previous box as color evidence. A small NCC template tracker hosts it.

use image::{imageops, GrayImage, RgbImage};

use crate::appearance::{
    bayes_posterior, color_probability_map, location_probability_map, masked_histogram, motion_center,
    ColorPosterior,
};
use crate::boxopt::{optimize_box_with, OptimizeMode, TargetMap};
use crate::config::DetectorConfig;
use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::frame::Frame;
use crate::geometry::{Bbox, PixelRect};
use crate::motion::analyze_images;

/// Search region side relative to the previous box.
pub const SEARCH_SCALE: f64 = 2.5;

/// `scale ×` the box about its center, shifted and capped to fit the frame,
/// then snapped to the pixel grid.
pub fn search_region(previous: &Bbox, width: usize, height: usize) -> Bbox {
    let r = previous
        .scale(SEARCH_SCALE)
        .clamp_to(width, height, 0.0)
        .pixel_rect();
    let r = PixelRect {
        x0: r.x0.max(0),
        y0: r.y0.max(0),
        x1: r.x1.min(width as i64),
        y1: r.y1.min(height as i64),
    };
    Bbox::from_corner(r.x0 as f64, r.y0 as f64, r.width() as f64, r.height() as f64)
}

fn crop(image: &RgbImage, rect: PixelRect) -> RgbImage {
    imageops::crop_imm(
        image,
        rect.x0 as u32,
        rect.y0 as u32,
        rect.width() as u32,
        rect.height() as u32,
    )
    .to_image()
}

#[derive(Clone, Debug)]
pub struct AssistState {
    pub previous_box: Bbox,
    pub search_region: Bbox,
    /// Color posterior of the previous box against the search region.
    pub posterior: ColorPosterior,
}

impl AssistState {
    pub fn new(previous_frame: &RgbImage, previous_box: Bbox, cfg: &DetectorConfig) -> Result<Self> {
        previous_box.validate()?;
        let (w, h) = (previous_frame.width() as usize, previous_frame.height() as usize);
        let previous_box = previous_box.clamp_to(w, h, 1.0);
        let search = search_region(&previous_box, w, h);
        let region = search.pixel_rect();
        let inner = previous_box.pixel_rect();
        if inner.area() == 0 {
            return Err(Error::DegenerateBox);
        }
        let bins = cfg.histogram_bins_per_channel;
        let full = masked_histogram(&crop(previous_frame, region), None, bins)?;
        let target = masked_histogram(&crop(previous_frame, inner), None, bins)?;
        let posterior = bayes_posterior(&target, &full)?;
        Ok(Self {
            previous_box,
            search_region: search,
            posterior,
        })
    }
}

/// Position-only box search on a precomputed target map. The size of `init`
/// is kept and the result stays inside the map.
pub fn refine_position(target: &TargetMap, init: &Bbox, cfg: &DetectorConfig) -> Result<Bbox> {
    let start = init.clamp_to(target.width(), target.height(), 0.0);
    let (best, _) = optimize_box_with(target, &start, cfg, OptimizeMode::PositionOnly)?;
    Ok(Bbox::new(best.x, best.y, init.w, init.h))
}

/// Refines `tracker_box` inside the state's search region. Falls back to the
/// tracker's box when the region shows no motion.
pub fn assist_refine(
    frame1: &RgbImage,
    frame2: &RgbImage,
    state: &AssistState,
    tracker_box: &Bbox,
    backend: &dyn FeatureExtractor,
    cfg: &DetectorConfig,
) -> Result<Bbox> {
    let region = state.search_region.pixel_rect();
    let (rw, rh) = (region.width() as usize, region.height() as usize);
    let (crop1, crop2) = (crop(frame1, region), crop(frame2, region));

    let mask = match analyze_images(&crop1, &crop2, backend, cfg) {
        Ok((_, m)) if !m.is_empty() => m,
        Ok(_) => return Ok(*tracker_box),
        Err(e) => return Err(e),
    };
    let center = motion_center(&mask.frame_mask)?;
    let location = location_probability_map(center, rw, rh, cfg.gaussian_sigma_fraction);
    let color = color_probability_map(&crop2, &state.posterior);
    let target = TargetMap::from_product(&color, &location)?;

    let (ox, oy) = (region.x0 as f64, region.y0 as f64);
    let local = refine_position(&target, &tracker_box.translate(-ox, -oy), cfg)?;
    Ok(local.translate(ox, oy))
}

fn luma(image: &RgbImage) -> GrayImage {
    imageops::grayscale(image)
}

/// Zero-mean normalized cross-correlation of `template` placed at `(u, v)`.
fn ncc_at(image: &GrayImage, template: &[f64], tmean: f64, tnorm: f64, tw: usize, th: usize, u: usize, v: usize) -> f64 {
    let n = (tw * th) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut cross = 0.0;
    for y in 0..th {
        for x in 0..tw {
            let p = image.get_pixel((u + x) as u32, (v + y) as u32)[0] as f64;
            sum += p;
            sum_sq += p * p;
            cross += p * (template[y * tw + x] - tmean);
        }
    }
    let var = (sum_sq - sum * sum / n).max(0.0);
    if var <= 0.0 || tnorm <= 0.0 {
        return 0.0;
    }
    cross / (var.sqrt() * tnorm)
}

/// Best NCC match of the previous frame's box content inside the search
/// region of `current`. Size is fixed.
pub fn ncc_match(previous: &RgbImage, current: &RgbImage, previous_box: &Bbox) -> Result<Bbox> {
    let (w, h) = (current.width() as usize, current.height() as usize);
    let prev_box = previous_box.clamp_to(w, h, 1.0);
    let rect = prev_box.pixel_rect();
    let (tw, th) = (rect.width() as usize, rect.height() as usize);
    if tw == 0 || th == 0 {
        return Err(Error::DegenerateBox);
    }
    let prev_gray = luma(previous);
    let template: Vec<f64> = (0..th)
        .flat_map(|y| (0..tw).map(move |x| (x, y)))
        .map(|(x, y)| prev_gray.get_pixel((rect.x0 as usize + x) as u32, (rect.y0 as usize + y) as u32)[0] as f64)
        .collect();
    let tmean = template.iter().sum::<f64>() / template.len() as f64;
    let tnorm = template.iter().map(|t| (t - tmean).powi(2)).sum::<f64>().sqrt();

    let region = search_region(&prev_box, w, h).pixel_rect();
    let cur_gray = luma(current);
    let mut best = (f64::NEG_INFINITY, rect.x0 as usize, rect.y0 as usize);
    let (u_end, v_end) = (region.x1 as usize, region.y1 as usize);
    for v in region.y0 as usize..=v_end.saturating_sub(th) {
        for u in region.x0 as usize..=u_end.saturating_sub(tw) {
            let s = ncc_at(&cur_gray, &template, tmean, tnorm, tw, th, u, v);
            // prefer the smallest displacement among ties
            let better = s > best.0 + 1e-12
                || ((s - best.0).abs() <= 1e-12 && displacement(u, v, rect) < displacement(best.1, best.2, rect));
            if better {
                best = (s, u, v);
            }
        }
    }
    let (dx, dy) = (best.1 as f64 - rect.x0 as f64, best.2 as f64 - rect.y0 as f64);
    Ok(prev_box.translate(dx, dy).clamp_to(w, h, 1.0))
}

fn displacement(u: usize, v: usize, rect: PixelRect) -> i64 {
    (u as i64 - rect.x0).abs() + (v as i64 - rect.y0).abs()
}

/// Fixed-scale NCC tracker; with `assist` set, each match is refined by
/// [`assist_refine`] using that backend.
pub fn baseline_track(
    frames: &[Frame],
    init: Bbox,
    assist: Option<&dyn FeatureExtractor>,
    cfg: &DetectorConfig,
) -> Result<Vec<Bbox>> {
    init.validate()?;
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let (w, h) = first.dims();
    let mut boxes = vec![init.clamp_to(w, h, 1.0)];
    for pair in frames.windows(2) {
        let (prev, cur) = (pair[0].image(), pair[1].image());
        let prev_box = *boxes.last().expect("non-empty");
        let matched = ncc_match(prev, cur, &prev_box)?;
        let next = match assist {
            Some(backend) => {
                let state = AssistState::new(prev, prev_box, cfg)?;
                let tracker_box = clamp_into(&matched, &state.search_region);
                assist_refine(prev, cur, &state, &tracker_box, backend, cfg)?
            }
            None => matched,
        };
        boxes.push(next.clamp_to(w, h, 1.0));
    }
    Ok(boxes)
}

fn clamp_into(b: &Bbox, region: &Bbox) -> Bbox {
    let w = b.w.min(region.w);
    let h = b.h.min(region.h);
    Bbox::new(
        b.x.clamp(region.left() + w / 2.0, region.right() - w / 2.0),
        b.y.clamp(region.top() + h / 2.0, region.bottom() - h / 2.0),
        w,
        h,
    )
}

/// Per-frame boxes as CSV, corner-based like tracking ground truth.
pub fn boxes_csv(boxes: &[Bbox]) -> String {
    let mut out = String::from("frame,x,y,w,h\n");
    for (i, b) in boxes.iter().enumerate() {
        out.push_str(&format!("{},{},{},{},{}\n", i + 1, b.left(), b.top(), b.w, b.h));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Grid, ProbabilityMap};

    fn cfg() -> DetectorConfig {
        DetectorConfig::default()
    }

    #[test]
    fn search_region_contains_previous_box() {
        for b in [
            Bbox::new(10.0, 10.0, 12.0, 8.0),
            Bbox::new(60.0, 40.0, 20.0, 20.0),
            Bbox::new(120.0, 5.0, 16.0, 10.0),
        ] {
            let r = search_region(&b, 128, 96);
            assert!(r.contains(&b.clamp_to(128, 96, 1.0)), "{r:?} vs {b:?}");
            assert!(r.pixel_rect().is_within(128, 96));
        }
    }

    #[test]
    fn uniform_target_keeps_tracker_box() {
        let t = TargetMap::new(ProbabilityMap::try_new(Grid::new(60, 60, 0.4)).unwrap());
        let init = Bbox::new(25.3, 31.7, 14.0, 10.0);
        assert_eq!(refine_position(&t, &init, &cfg()).unwrap(), init);
    }

    #[test]
    fn offset_block_pulls_the_box() {
        let grid = Grid::from_fn(64, 64, |x, y| if (30..50).contains(&x) && (20..40).contains(&y) { 1.0 } else { 0.0 });
        let t = TargetMap::new(ProbabilityMap::try_new(grid).unwrap());
        let init = Bbox::new(34.0, 30.0, 20.0, 20.0);
        let b = refine_position(&t, &init, &cfg()).unwrap();
        assert_eq!((b.w, b.h), (20.0, 20.0));
        assert!(b.center_distance(&Bbox::new(40.0, 30.0, 1.0, 1.0)) <= 2.0, "{b:?}");
    }

    #[test]
    fn static_frames_pass_through() {
        let img = RgbImage::from_fn(64, 64, |x, y| image::Rgb([(x * 4) as u8, (y * 4) as u8, 60]));
        let state = AssistState::new(&img, Bbox::new(30.0, 30.0, 12.0, 12.0), &cfg()).unwrap();
        let tracker = Bbox::new(31.0, 29.0, 12.0, 12.0);
        let out = assist_refine(&img, &img, &state, &tracker, &crate::features::RawFeatures, &cfg()).unwrap();
        assert_eq!(out, tracker);
    }

    #[test]
    fn boxes_csv_is_corner_based() {
        let csv = boxes_csv(&[Bbox::new(10.0, 10.0, 4.0, 6.0)]);
        assert_eq!(csv, "frame,x,y,w,h\n1,8,7,4,6\n");
    }
}
