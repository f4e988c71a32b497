//! Overlap and center-error metrics, success/precision curves and the
//! per-pair evaluation loop.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::PairRecord;
use crate::detect::Detector;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::Bbox;

/// Success-curve thresholds: IOU 0.00 to 1.00 in steps of 0.01.
pub const SUCCESS_STEPS: usize = 100;
/// Precision-curve thresholds: 0 to 50 px in steps of 1.
pub const PRECISION_MAX_PX: usize = 50;
pub const PRECISION_REPORT_PX: usize = 30;

/// Intersection over union of two boxes, computed on real-valued extents.
pub fn iou(a: &Bbox, b: &Bbox) -> Result<f64> {
    if !(a.area() > 0.0) || !(b.area() > 0.0) {
        return Err(Error::InvalidBox(format!("iou needs positive areas: {a:?}, {b:?}")));
    }
    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

pub fn center_error(a: &Bbox, b: &Bbox) -> f64 {
    a.center_distance(b)
}

/// Outcome of one pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairOutcome {
    pub pair_id: String,
    pub prediction: Option<Bbox>,
    pub iou: f64,
    pub center_error: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub pairs: Vec<PairOutcome>,
    /// `(threshold, fraction of pairs with IOU > threshold)`.
    pub success_curve: Vec<(f64, f64)>,
    /// `(threshold px, fraction of pairs with center error <= threshold)`.
    pub precision_curve: Vec<(f64, f64)>,
    /// Mean of the success-curve samples.
    pub auc: f64,
    pub pre30: f64,
}

pub fn success_curve(ious: &[f64]) -> Vec<(f64, f64)> {
    let n = ious.len().max(1) as f64;
    (0..=SUCCESS_STEPS)
        .map(|i| {
            let t = i as f64 / SUCCESS_STEPS as f64;
            (t, ious.iter().filter(|&&v| v > t).count() as f64 / n)
        })
        .collect()
}

pub fn precision_curve(errors: &[f64]) -> Vec<(f64, f64)> {
    let n = errors.len().max(1) as f64;
    (0..=PRECISION_MAX_PX)
        .map(|t| {
            let t = t as f64;
            (t, errors.iter().filter(|&&e| e <= t).count() as f64 / n)
        })
        .collect()
}

pub fn area_under_curve(curve: &[(f64, f64)]) -> f64 {
    curve.iter().map(|(_, v)| v).sum::<f64>() / curve.len().max(1) as f64
}

impl EvalResult {
    pub fn from_outcomes(mut pairs: Vec<PairOutcome>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Dataset("no pairs to evaluate".into()));
        }
        pairs.sort_by(|a, b| natural_key(&a.pair_id).cmp(&natural_key(&b.pair_id)));
        let ious: Vec<f64> = pairs.iter().map(|p| p.iou).collect();
        let errors: Vec<f64> = pairs.iter().map(|p| p.center_error).collect();
        let success = success_curve(&ious);
        let precision = precision_curve(&errors);
        debug_assert!(success.windows(2).all(|w| w[1].1 <= w[0].1));
        debug_assert!(precision.windows(2).all(|w| w[1].1 >= w[0].1));
        Ok(Self {
            auc: area_under_curve(&success),
            pre30: precision[PRECISION_REPORT_PX].1,
            success_curve: success,
            precision_curve: precision,
            pairs,
        })
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from("pair_id,iou,center_error\n");
        for p in &self.pairs {
            let _ = writeln!(out, "{},{},{}", p.pair_id, p.iou, p.center_error);
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        curves_csv(&self.success_curve, &self.precision_curve)
    }
}

/// Splits `seq:12-15` into text and numeric runs so ids sort numerically.
fn natural_key(id: &str) -> Vec<(String, u64)> {
    let mut key = Vec::new();
    let mut text = String::new();
    let mut digits = String::new();
    for ch in id.chars() {
        if ch.is_ascii_digit() {
            digits.push(ch);
        } else {
            if !digits.is_empty() {
                key.push((std::mem::take(&mut text), digits.parse().unwrap_or(u64::MAX)));
                digits.clear();
            }
            text.push(ch);
        }
    }
    key.push((text, digits.parse().unwrap_or(0)));
    key
}

pub fn curves_csv(success: &[(f64, f64)], precision: &[(f64, f64)]) -> String {
    let mut out = String::from("threshold,success_rate\n");
    for (t, v) in success {
        let _ = writeln!(out, "{t:.2},{v}");
    }
    out.push_str("\nthreshold,precision\n");
    for (t, v) in precision {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

/// Parses the two blocks written by [`curves_csv`].
pub fn parse_curves_csv(text: &str) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let mut success = Vec::new();
    let mut precision = Vec::new();
    let mut block: Option<&mut Vec<(f64, f64)>> = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        match line {
            "" => continue,
            "threshold,success_rate" => block = Some(&mut success),
            "threshold,precision" => block = Some(&mut precision),
            _ => {
                let parse = || -> Option<(f64, f64)> {
                    let (t, v) = line.split_once(',')?;
                    Some((t.trim().parse().ok()?, v.trim().parse().ok()?))
                };
                let row = parse().ok_or_else(|| Error::Dataset(format!("curves line {}: {line:?}", n + 1)))?;
                block
                    .as_mut()
                    .ok_or_else(|| Error::Dataset("curves file has no header".into()))?
                    .push(row);
            }
        }
    }
    if success.is_empty() || precision.is_empty() {
        return Err(Error::Dataset("curves file needs both blocks".into()));
    }
    Ok((success, precision))
}

fn failure_error(pair: &PairRecord) -> f64 {
    image::image_dimensions(&pair.path_b)
        .map(|(w, h)| (w as f64).hypot(h as f64))
        .unwrap_or(f64::INFINITY)
}

/// Scores a prediction (or a failure) against the pair's ground truth.
/// Failures count as IOU 0 with the frame diagonal as center error.
pub fn score_outcome(pair: &PairRecord, prediction: Result<Bbox>) -> PairOutcome {
    let pair_id = pair.id();
    match prediction.and_then(|b| Ok((b, iou(&b, &pair.ground_truth)?))) {
        Ok((b, overlap)) => PairOutcome {
            pair_id,
            prediction: Some(b),
            iou: overlap,
            center_error: center_error(&b, &pair.ground_truth),
            error: None,
        },
        Err(e) => PairOutcome {
            pair_id,
            prediction: None,
            iou: 0.0,
            center_error: failure_error(pair),
            error: Some(e.to_string()),
        },
    }
}

/// Runs `predict` on every pair with up to `jobs` threads and aggregates.
pub fn evaluate_with<F>(pairs: &[PairRecord], jobs: usize, predict: F) -> Result<EvalResult>
where
    F: Fn(&PairRecord) -> Result<Bbox> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Dataset(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| score_outcome(p, predict(p)))
            .collect::<Vec<_>>()
    });
    for o in outcomes.iter().filter(|o| o.error.is_some()) {
        tracing::debug!(pair = %o.pair_id, error = ?o.error, "pair scored as failure");
    }
    EvalResult::from_outcomes(outcomes)
}

/// Loads both frames of a pair and runs the detector.
pub fn detect_pair(detector: &Detector, pair: &PairRecord) -> Result<Bbox> {
    let a = Frame::load(&pair.path_a)?;
    let b = Frame::load(&pair.path_b)?;
    Ok(detector.detect(&a, &b)?.bbox)
}

pub fn evaluate(pairs: &[PairRecord], detector: &Detector, jobs: usize) -> Result<EvalResult> {
    evaluate_with(pairs, jobs, |p| detect_pair(detector, p))
}

/// Tag file: `sequence tag tag…` per line.
pub fn parse_tags(text: &str) -> HashMap<String, Vec<String>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut it = l.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let name = it.next().unwrap_or_default().to_string();
            (name, it.map(str::to_string).collect())
        })
        .collect()
}

/// Keeps the pairs whose sequence carries `tag`.
pub fn filter_by_tag(pairs: &[PairRecord], tags: &HashMap<String, Vec<String>>, tag: &str) -> Vec<PairRecord> {
    pairs
        .iter()
        .filter(|p| tags.get(&p.sequence).is_some_and(|t| t.iter().any(|x| x == tag)))
        .cloned()
        .collect()
}
