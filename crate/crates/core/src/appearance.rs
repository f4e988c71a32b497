//! Color and location evidence for the moving area: masked RGB histograms,
//! the Bayesian color posterior, erosion-based center finding and the
//! Gaussian location prior.

use image::RgbImage;

use crate::error::{Error, Result};
use crate::raster::{Grid, Mask, ProbabilityMap};

/// Joint RGB histogram with `bins_per_channel³` bins.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorHistogram {
    bins_per_channel: u32,
    counts: Vec<u64>,
    total: u64,
}

impl ColorHistogram {
    pub fn empty(bins_per_channel: u32) -> Self {
        let n = (bins_per_channel as usize).pow(3);
        Self {
            bins_per_channel,
            counts: vec![0; n],
            total: 0,
        }
    }

    pub fn bins_per_channel(&self) -> u32 {
        self.bins_per_channel
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn add(&mut self, bin: usize, count: u64) {
        self.counts[bin] += count;
        self.total += count;
    }
}

/// Bin of an RGB triple; with 16 bins per channel this is
/// `⌊R/16⌋·256 + ⌊G/16⌋·16 + ⌊B/16⌋`.
#[inline]
pub fn color_bin(rgb: [u8; 3], bins_per_channel: u32) -> usize {
    let width = 256 / bins_per_channel;
    let b = bins_per_channel as usize;
    let q = |v: u8| (v as u32 / width) as usize;
    q(rgb[0]) * b * b + q(rgb[1]) * b + q(rgb[2])
}

/// Counts pixels into color bins. With a mask, only set pixels are counted.
pub fn masked_histogram(
    image: &RgbImage,
    mask: Option<&Mask>,
    bins_per_channel: u32,
) -> Result<ColorHistogram> {
    if let Some(m) = mask {
        if (m.width() as u32, m.height() as u32) != image.dimensions() {
            return Err(Error::ShapeMismatch(format!(
                "mask {:?} vs frame {:?}",
                m.dims(),
                image.dimensions()
            )));
        }
    }
    let mut hist = ColorHistogram::empty(bins_per_channel);
    for (i, px) in image.pixels().enumerate() {
        if mask.map_or(true, |m| m.as_slice()[i]) {
            hist.add(color_bin(px.0, bins_per_channel), 1);
        }
    }
    Ok(hist)
}

/// Histogram of the masked image where masked-out pixels are kept as black
/// instead of skipped. Fidelity toggle only; breaks the `hMot ≤ hFull` bound.
pub fn zero_filled_histogram(image: &RgbImage, mask: &Mask, bins_per_channel: u32) -> Result<ColorHistogram> {
    let mut hist = masked_histogram(image, Some(mask), bins_per_channel)?;
    let outside = (image.width() as u64 * image.height() as u64) - hist.total();
    hist.add(0, outside);
    Ok(hist)
}

/// Per-bin probability that a color belongs to the moving target.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorPosterior {
    bins_per_channel: u32,
    probabilities: Vec<f64>,
    /// Prior probability of the moving area.
    pub p_motion: f64,
}

impl ColorPosterior {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn bins_per_channel(&self) -> u32 {
        self.bins_per_channel
    }

    #[inline]
    pub fn probability_of(&self, rgb: [u8; 3]) -> f64 {
        self.probabilities[color_bin(rgb, self.bins_per_channel)]
    }

    /// Uniform posterior, mainly for tests.
    pub fn constant(bins_per_channel: u32, value: f64) -> Self {
        Self {
            bins_per_channel,
            probabilities: vec![value.clamp(0.0, 1.0); (bins_per_channel as usize).pow(3)],
            p_motion: value.clamp(0.0, 1.0),
        }
    }

    pub fn from_probabilities(bins_per_channel: u32, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != (bins_per_channel as usize).pow(3) {
            return Err(Error::ShapeMismatch("posterior length".into()));
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::ShapeMismatch("posterior entry outside [0, 1]".into()));
        }
        Ok(Self {
            bins_per_channel,
            probabilities,
            p_motion: f64::NAN,
        })
    }
}

/// `H_target(c) = P(c | mot) · P(mot) / P(c)` with `P(mot) = |mot| / |frame|`.
///
/// Evaluated as the three-factor product; it collapses to
/// `hMot(c) / hFull(c)`. Bins absent from the frame get 0.
pub fn bayes_posterior(h_motion: &ColorHistogram, h_full: &ColorHistogram) -> Result<ColorPosterior> {
    if h_full.total() == 0 {
        return Err(Error::ShapeMismatch("full-frame histogram is empty".into()));
    }
    let p_motion = h_motion.total() as f64 / h_full.total() as f64;
    bayes_posterior_with_prior(h_motion, h_full, p_motion)
}

/// Same as [`bayes_posterior`] but with an explicit `P(mot)`.
pub fn bayes_posterior_with_prior(
    h_motion: &ColorHistogram,
    h_full: &ColorHistogram,
    p_motion: f64,
) -> Result<ColorPosterior> {
    if h_motion.len() != h_full.len() {
        return Err(Error::ShapeMismatch("histograms have different bin counts".into()));
    }
    if h_full.total() == 0 {
        return Err(Error::ShapeMismatch("full-frame histogram is empty".into()));
    }
    if h_motion.total() == 0 {
        return Err(Error::NoMotionEvidence);
    }
    let (mot_total, full_total) = (h_motion.total() as f64, h_full.total() as f64);
    let probabilities = h_motion
        .counts()
        .iter()
        .zip(h_full.counts())
        .map(|(&m, &f)| {
            if f == 0 {
                return 0.0;
            }
            let p_c_given_mot = m as f64 / mot_total;
            let p_c = f as f64 / full_total;
            (p_c_given_mot * p_motion / p_c).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ColorPosterior {
        bins_per_channel: h_full.bins_per_channel(),
        probabilities,
        p_motion,
    })
}

/// Replaces every pixel by the posterior of its color bin.
pub fn color_probability_map(image: &RgbImage, posterior: &ColorPosterior) -> ProbabilityMap {
    let data = image.pixels().map(|p| posterior.probability_of(p.0)).collect();
    let grid = Grid::from_vec(image.width() as usize, image.height() as usize, data)
        .expect("pixel count matches dimensions");
    ProbabilityMap::clamped(grid)
}

/// Pixel coordinates of the moving-area center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionCenter {
    pub x: f64,
    pub y: f64,
}

/// One erosion step with the 3×3 cross; pixels outside the raster count as unset.
pub fn erode_cross(mask: &Mask) -> Mask {
    let (w, h) = mask.dims();
    Grid::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && x > 0
            && y > 0
            && x + 1 < w
            && y + 1 < h
            && mask.get(x - 1, y)
            && mask.get(x + 1, y)
            && mask.get(x, y - 1)
            && mask.get(x, y + 1)
    })
}

fn rounded_centroid(mask: &Mask) -> MotionCenter {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1.0;
            }
        }
    }
    MotionCenter {
        x: (sx / n).round(),
        y: (sy / n).round(),
    }
}

/// Erodes until one pixel is left; if the next step would empty the mask
/// first, returns the rounded centroid of the last non-empty result.
pub fn motion_center(mask: &Mask) -> Result<MotionCenter> {
    let mut current = mask.clone();
    let mut count = current.count_set();
    if count == 0 {
        return Err(Error::NoMotion);
    }
    loop {
        if count == 1 {
            return Ok(rounded_centroid(&current));
        }
        let next = erode_cross(&current);
        let next_count = next.count_set();
        if next_count == 0 || next_count == count {
            return Ok(rounded_centroid(&current));
        }
        current = next;
        count = next_count;
    }
}

/// Anisotropic Gaussian with peak 1 at `center` and per-axis sigma
/// `sigma_fraction · W` and `sigma_fraction · H`.
pub fn location_probability_map(
    center: MotionCenter,
    width: usize,
    height: usize,
    sigma_fraction: f64,
) -> ProbabilityMap {
    let sx = sigma_fraction * width as f64;
    let sy = sigma_fraction * height as f64;
    let gx: Vec<f64> = (0..width)
        .map(|x| (x as f64 - center.x).powi(2) / (2.0 * sx * sx))
        .collect();
    let gy: Vec<f64> = (0..height)
        .map(|y| (y as f64 - center.y).powi(2) / (2.0 * sy * sy))
        .collect();
    ProbabilityMap::clamped(Grid::from_fn(width, height, |x, y| (-(gx[x] + gy[y])).exp()))
}
