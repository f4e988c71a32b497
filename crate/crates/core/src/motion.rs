//! Moving-area extraction: feature difference, channel accumulation,
//! max-relative binarization and upsampling to frame resolution.

use image::RgbImage;

use crate::config::{Accumulation, DetectorConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureMap};
use crate::frame::Frame;
use crate::raster::{bicubic_resize, resize_mask, Grid, Mask};

/// Channel-accumulated feature difference at feature resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceMap {
    pub values: Grid<f64>,
    pub stride: usize,
}

impl DifferenceMap {
    /// Upsamples to `width × height` and rescales by the maximum so the result
    /// lies in `[0, 1]`. An all-zero map stays all-zero.
    pub fn normalized_upsample(&self, width: usize, height: usize) -> Result<Grid<f64>> {
        let up = bicubic_resize(&self.values, width, height)?.map(|v| v.max(0.0));
        let max = up.max_value();
        Ok(if max > 0.0 { up.map(|v| (v / max).min(1.0)) } else { up })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionMask {
    /// Binarized difference at feature resolution.
    pub feature_mask: Mask,
    /// The same mask resampled to frame resolution.
    pub frame_mask: Mask,
    pub non_zero_count: usize,
}

impl MotionMask {
    pub fn from_frame_mask(feature_mask: Mask, frame_mask: Mask) -> Self {
        let non_zero_count = frame_mask.count_set();
        Self {
            feature_mask,
            frame_mask,
            non_zero_count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.non_zero_count == 0
    }
}

/// Difference maps (one per backend) alongside the combined mask.
#[derive(Clone, Debug)]
pub struct MotionAnalysis {
    pub differences: Vec<DifferenceMap>,
    pub mask: MotionMask,
}

pub fn feature_difference(f1: &FeatureMap, f2: &FeatureMap) -> Result<DifferenceMap> {
    feature_difference_with(f1, f2, Accumulation::Absolute)
}

pub fn feature_difference_with(
    f1: &FeatureMap,
    f2: &FeatureMap,
    accumulation: Accumulation,
) -> Result<DifferenceMap> {
    if f1.shape() != f2.shape() {
        return Err(Error::ShapeMismatch(format!(
            "feature maps {:?} and {:?} (h, w, C, stride)",
            f1.shape(),
            f2.shape()
        )));
    }
    let c = f1.channels();
    let values = f1
        .values()
        .chunks_exact(c)
        .zip(f2.values().chunks_exact(c))
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(&p, &q)| {
                    let d = p as f64 - q as f64;
                    match accumulation {
                        Accumulation::Absolute => d.abs(),
                        Accumulation::Squared => d * d,
                    }
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DifferenceMap {
        values: Grid::from_vec(f1.width(), f1.height(), values)?,
        stride: f1.stride(),
    })
}

/// Marks every value `>= ratio * max`. An all-zero input yields an empty mask.
pub fn binarize(diff: &Grid<f64>, ratio: f64) -> Mask {
    let max = diff.max_value();
    if !(max > 0.0) {
        return diff.map(|_| false);
    }
    let threshold = ratio * max;
    diff.map(|v| v >= threshold)
}

fn check_pair(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::ShapeMismatch(format!(
            "frames are {:?} and {:?}",
            a.dimensions(),
            b.dimensions()
        )));
    }
    Ok(())
}

/// Difference and masks for one backend on an arbitrary pair of equal-size
/// images (used directly by the tracking assist on cropped regions).
pub fn analyze_images(
    image1: &RgbImage,
    image2: &RgbImage,
    backend: &dyn FeatureExtractor,
    cfg: &DetectorConfig,
) -> Result<(DifferenceMap, MotionMask)> {
    check_pair(image1, image2)?;
    let f1 = backend.extract(image1)?;
    let f2 = backend.extract(image2)?;
    let diff = feature_difference_with(&f1, &f2, cfg.accumulation)?;
    let feature_mask = binarize(&diff.values, cfg.binarization_ratio);
    let frame_mask = resize_mask(
        &feature_mask,
        image1.width() as usize,
        image1.height() as usize,
        cfg.upsample_rebinarize_threshold,
    )?;
    Ok((diff, MotionMask::from_frame_mask(feature_mask, frame_mask)))
}

/// Runs each backend independently and ORs the frame-resolution masks. With a
/// single backend this is exactly [`extract_motion_mask`]; with several, the
/// returned `feature_mask` is the fused frame-resolution mask.
pub fn analyze_motion(
    frame1: &Frame,
    frame2: &Frame,
    backends: &[&dyn FeatureExtractor],
    cfg: &DetectorConfig,
) -> Result<MotionAnalysis> {
    check_pair(frame1.image(), frame2.image())?;
    let (first, rest) = backends
        .split_first()
        .ok_or_else(|| Error::Backend("no feature backend given".into()))?;
    let (diff, mut mask) = analyze_images(frame1.image(), frame2.image(), *first, cfg)?;
    let mut differences = vec![diff];
    for backend in rest {
        let (diff, m) = analyze_images(frame1.image(), frame2.image(), *backend, cfg)?;
        let fused = mask.frame_mask.or(&m.frame_mask)?;
        mask = MotionMask::from_frame_mask(fused.clone(), fused);
        differences.push(diff);
    }
    Ok(MotionAnalysis { differences, mask })
}

pub fn extract_motion_mask(
    frame1: &Frame,
    frame2: &Frame,
    backend: &dyn FeatureExtractor,
    cfg: &DetectorConfig,
) -> Result<MotionMask> {
    Ok(analyze_motion(frame1, frame2, &[backend], cfg)?.mask)
}
