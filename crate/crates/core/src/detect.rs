//! End-to-end detection on an image pair.
//!
//! Stages: moving-area mask → color posterior and color map → motion center
//! and location map → target map → initial box → box optimization. The
//! target-map source and the optimization stage can be switched for ablation
//! runs via [`DetectOptions`].

use std::sync::Arc;

use crate::appearance::{
    bayes_posterior, bayes_posterior_with_prior, color_probability_map, location_probability_map,
    masked_histogram, motion_center, zero_filled_histogram, ColorPosterior, MotionCenter,
};
use crate::boxopt::{initial_box, optimize_box, score, OptimizerTrace, TargetMap};
use crate::config::DetectorConfig;
use crate::error::{Error, Result, StageExt};
use crate::features::{FeatureBackendSpec, FeatureExtractor};
use crate::frame::Frame;
use crate::geometry::Bbox;
use crate::motion::{analyze_motion, DifferenceMap, MotionMask};
use crate::raster::{Grid, ProbabilityMap};

/// What the box search runs on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TargetSource {
    /// Color posterior map times the location prior.
    #[default]
    ColorAndLocation,
    /// Color posterior map alone.
    ColorOnly,
    /// The upsampled binary motion mask itself.
    MotionMask,
    /// Max-normalized upsampled difference map times the location prior.
    DifferenceAndLocation,
}

impl TargetSource {
    fn uses_color(self) -> bool {
        matches!(self, TargetSource::ColorAndLocation | TargetSource::ColorOnly)
    }

    fn uses_location(self) -> bool {
        matches!(
            self,
            TargetSource::ColorAndLocation | TargetSource::DifferenceAndLocation
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectOptions {
    pub target: TargetSource,
    /// When false the initial box is the result.
    pub optimize: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            target: TargetSource::ColorAndLocation,
            optimize: true,
        }
    }
}

/// Every intermediate product of one detection.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub differences: Vec<DifferenceMap>,
    pub motion: MotionMask,
    pub posterior: Option<ColorPosterior>,
    pub color_map: Option<ProbabilityMap>,
    pub center: MotionCenter,
    pub location_map: Option<ProbabilityMap>,
    pub target: TargetMap,
    pub initial_box: Bbox,
    pub trace: Option<OptimizerTrace>,
}

#[derive(Clone, Debug)]
pub struct Detection {
    pub bbox: Bbox,
    /// Score of `bbox` on the target map.
    pub score: f64,
    pub diagnostics: Diagnostics,
}

/// A configured detector: backends, tunables and pipeline switches.
#[derive(Clone)]
pub struct Detector {
    backends: Vec<Arc<dyn FeatureExtractor>>,
    cfg: DetectorConfig,
    options: DetectOptions,
}

impl std::fmt::Debug for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<String> = self.backends.iter().map(|b| b.name()).collect();
        f.debug_struct("Detector")
            .field("backends", &names)
            .field("cfg", &self.cfg)
            .field("options", &self.options)
            .finish()
    }
}

impl Detector {
    pub fn new(backend: Arc<dyn FeatureExtractor>, cfg: DetectorConfig) -> Result<Self> {
        Self::fused(vec![backend], cfg, DetectOptions::default())
    }

    /// Several backends are combined by OR-ing their frame-resolution masks.
    pub fn fused(
        backends: Vec<Arc<dyn FeatureExtractor>>,
        cfg: DetectorConfig,
        options: DetectOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        if backends.is_empty() {
            return Err(Error::Backend("detector needs at least one backend".into()));
        }
        Ok(Self {
            backends,
            cfg,
            options,
        })
    }

    pub fn with_options(mut self, options: DetectOptions) -> Self {
        self.options = options;
        self
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn options(&self) -> DetectOptions {
        self.options
    }

    pub fn detect(&self, frame1: &Frame, frame2: &Frame) -> Result<Detection> {
        let cfg = &self.cfg;
        let (width, height) = frame2.dims();
        let backends: Vec<&dyn FeatureExtractor> = self.backends.iter().map(|b| b.as_ref()).collect();
        let analysis = analyze_motion(frame1, frame2, &backends, cfg).stage("motion")?;
        let motion = analysis.mask;
        if motion.is_empty() {
            return Err(Error::NoMotion);
        }

        let center = motion_center(&motion.frame_mask).stage("motion center")?;
        let init = initial_box(center, motion.non_zero_count, width, height).stage("initial box")?;

        let source = self.options.target;
        let (posterior, color_map) = if source.uses_color() {
            let posterior = self.posterior(frame2, &motion).stage("color posterior")?;
            let map = color_probability_map(frame2.image(), &posterior);
            (Some(posterior), Some(map))
        } else {
            (None, None)
        };
        let location_map = source
            .uses_location()
            .then(|| location_probability_map(center, width, height, cfg.gaussian_sigma_fraction));

        let target_map = match source {
            TargetSource::ColorAndLocation => color_map
                .as_ref()
                .expect("color map")
                .product(location_map.as_ref().expect("location map")),
            TargetSource::ColorOnly => Ok(color_map.clone().expect("color map")),
            TargetSource::MotionMask => Ok(ProbabilityMap::from_mask(&motion.frame_mask)),
            TargetSource::DifferenceAndLocation => {
                normalized_difference(&analysis.differences, width, height)
                    .and_then(|d| d.product(location_map.as_ref().expect("location map")))
            }
        }
        .stage("target map")?;
        let target = TargetMap::new(target_map);

        let (bbox, trace) = if self.options.optimize {
            let (b, t) = optimize_box(&target, &init, cfg).stage("box optimization")?;
            (b, Some(t))
        } else {
            (init, None)
        };
        let score = score(&target, &bbox, cfg.penalty_lambda).stage("score")?;

        Ok(Detection {
            bbox,
            score,
            diagnostics: Diagnostics {
                differences: analysis.differences,
                motion,
                posterior,
                color_map,
                center,
                location_map,
                target,
                initial_box: init,
                trace,
            },
        })
    }

    fn posterior(&self, frame: &Frame, motion: &MotionMask) -> Result<ColorPosterior> {
        let bins = self.cfg.histogram_bins_per_channel;
        let full = masked_histogram(frame.image(), None, bins)?;
        if self.cfg.count_masked_as_black {
            let mot = zero_filled_histogram(frame.image(), &motion.frame_mask, bins)?;
            let p_motion = motion.non_zero_count as f64 / full.total() as f64;
            bayes_posterior_with_prior(&mot, &full, p_motion)
        } else {
            let mot = masked_histogram(frame.image(), Some(&motion.frame_mask), bins)?;
            bayes_posterior(&mot, &full)
        }
    }
}

/// Pointwise maximum of the max-normalized, upsampled difference maps.
fn normalized_difference(diffs: &[DifferenceMap], width: usize, height: usize) -> Result<ProbabilityMap> {
    let mut acc = Grid::new(width, height, 0.0f64);
    for d in diffs {
        let up = d.normalized_upsample(width, height)?;
        for (a, v) in acc.as_mut_slice().iter_mut().zip(up.as_slice()) {
            *a = a.max(*v);
        }
    }
    Ok(ProbabilityMap::clamped(acc))
}

/// One-shot detection with a backend built from `spec`.
pub fn detect(frame1: &Frame, frame2: &Frame, spec: &FeatureBackendSpec, cfg: &DetectorConfig) -> Result<Detection> {
    Detector::new(spec.build()?, cfg.clone())?.detect(frame1, frame2)
}
