//! Box search on the target probability map.
//!
//! The score of a box is its mean target probability plus a size reward,
//! `S = sum(box) / area + λ · (w + h) / (W + H)`, with rectangle sums read from
//! an integral image. The optimizer probes each of `x, y, w, h` with a forward
//! difference, moves all four simultaneously along the estimated gradient
//! (ascent), clamps, and stops when the rounded box repeats or after
//! `max_iterations`. The best box ever visited is returned.

use serde::Serialize;

use crate::appearance::MotionCenter;
use crate::config::DetectorConfig;
use crate::error::{Error, Result};
use crate::geometry::Bbox;
use crate::integral::{box_sum, IntegralImage};
use crate::raster::ProbabilityMap;

/// Probability map together with its summed-area table.
#[derive(Clone, Debug)]
pub struct TargetMap {
    map: ProbabilityMap,
    integral: IntegralImage,
}

impl TargetMap {
    pub fn new(map: ProbabilityMap) -> Self {
        let integral = IntegralImage::new(map.grid());
        Self { map, integral }
    }

    /// Pointwise product of the color and location maps.
    pub fn from_product(color: &ProbabilityMap, location: &ProbabilityMap) -> Result<Self> {
        Ok(Self::new(color.product(location)?))
    }

    pub fn map(&self) -> &ProbabilityMap {
        &self.map
    }

    pub fn integral(&self) -> &IntegralImage {
        &self.integral
    }

    pub fn width(&self) -> usize {
        self.map.width()
    }

    pub fn height(&self) -> usize {
        self.map.height()
    }
}

/// Square of side `√(2N)` at the motion center, clamped into the frame.
pub fn initial_box(center: MotionCenter, non_zero: usize, width: usize, height: usize) -> Result<Bbox> {
    if non_zero == 0 {
        return Err(Error::NoMotion);
    }
    let side = (2.0 * non_zero as f64).sqrt();
    Ok(Bbox::new(center.x, center.y, side, side).clamp_to(width, height, 0.0))
}

pub fn score(target: &TargetMap, bbox: &Bbox, lambda: f64) -> Result<f64> {
    let rect = bbox.pixel_rect();
    let sum = box_sum(target.integral(), bbox)?;
    let extent = (target.width() + target.height()) as f64;
    Ok(sum / rect.area() as f64 + lambda * (bbox.w + bbox.h) / extent)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Which parameters the optimizer may move.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizeMode {
    #[default]
    Full,
    /// Only `x` and `y`; the box size is frozen.
    PositionOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub iteration: u32,
    pub bbox: Bbox,
    pub score: f64,
    /// Whether this box became the new incumbent.
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerTrace {
    /// Step 0 is the initial box; each later step is the box after one update.
    pub steps: Vec<TraceStep>,
    pub termination: Termination,
}

impl OptimizerTrace {
    /// Number of update iterations performed.
    pub fn iterations(&self) -> u32 {
        self.steps.last().map_or(0, |s| s.iteration)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,x,y,w,h,score\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.iteration, s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h, s.score
            ));
        }
        out
    }
}

struct Scorer<'a> {
    target: &'a TargetMap,
    lambda: f64,
    min_side: f64,
}

impl Scorer<'_> {
    fn clamp(&self, b: &Bbox) -> Bbox {
        b.clamp_to(self.target.width(), self.target.height(), self.min_side)
    }

    fn score(&self, b: &Bbox) -> Result<f64> {
        score(self.target, b, self.lambda)
    }

    /// Forward-difference slope along one parameter; probes leaving the frame
    /// are clamped back in first.
    fn slope(&self, base: &Bbox, base_score: f64, delta: f64, probe: impl Fn(&mut Bbox)) -> Result<f64> {
        let mut b = *base;
        probe(&mut b);
        let b = self.clamp(&b);
        Ok((self.score(&b)? - base_score) / delta)
    }
}

pub fn optimize_box(target: &TargetMap, init: &Bbox, cfg: &DetectorConfig) -> Result<(Bbox, OptimizerTrace)> {
    optimize_box_with(target, init, cfg, OptimizeMode::Full)
}

pub fn optimize_box_with(
    target: &TargetMap,
    init: &Bbox,
    cfg: &DetectorConfig,
    mode: OptimizeMode,
) -> Result<(Bbox, OptimizerTrace)> {
    init.validate()?;
    let min_side = match mode {
        OptimizeMode::Full => cfg.min_box_side,
        OptimizeMode::PositionOnly => 0.0,
    };
    let scorer = Scorer {
        target,
        lambda: cfg.penalty_lambda,
        min_side,
    };
    let (lr, delta) = (cfg.learning_rate, cfg.perturbation);

    let mut current = *init;
    let mut current_score = scorer.score(&current)?;
    let (mut best, mut best_score) = (current, current_score);
    let mut steps = vec![TraceStep {
        iteration: 0,
        bbox: current,
        score: current_score,
        accepted: true,
    }];
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=cfg.max_iterations {
        let gx = scorer.slope(&current, current_score, delta, |b| b.x += delta)?;
        let gy = scorer.slope(&current, current_score, delta, |b| b.y += delta)?;
        let mut next = current.translate(lr * gx, lr * gy);
        if mode == OptimizeMode::Full {
            let gw = scorer.slope(&current, current_score, delta, |b| b.w += delta)?;
            let gh = scorer.slope(&current, current_score, delta, |b| b.h += delta)?;
            next.w += lr * gw;
            next.h += lr * gh;
        }
        let next = scorer.clamp(&next);
        let next_score = scorer.score(&next)?;
        let accepted = next_score > best_score;
        if accepted {
            best = next;
            best_score = next_score;
        }
        steps.push(TraceStep {
            iteration,
            bbox: next,
            score: next_score,
            accepted,
        });
        let unchanged = next.pixel_rect() == current.pixel_rect();
        current = next;
        current_score = next_score;
        if unchanged {
            termination = Termination::Converged;
            break;
        }
    }
    Ok((best, OptimizerTrace { steps, termination }))
}
