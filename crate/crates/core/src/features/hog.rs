//! Histogram of oriented gradients, reshaped to one 9-bin vector per cell.
//!
//! Gradients use centered `[-1, 0, 1]` differences (replicated edges) on the
//! color channel with the largest magnitude. Orientations are unsigned
//! (0 to 180°) and vote linearly into the two nearest bin centers. Cell
//! histograms are normalized per 2×2 block with L2-hys, and each cell's
//! output is the mean of its normalized copies over the blocks containing it.

use image::RgbImage;

use super::{cells_for, FeatureExtractor, FeatureMap};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HogFeatures {
    pub cell_size: usize,
    pub block_cells: usize,
    pub orientations: usize,
    /// L2-hys clip level.
    pub clip: f32,
}

impl Default for HogFeatures {
    fn default() -> Self {
        Self {
            cell_size: 8,
            block_cells: 2,
            orientations: 9,
            clip: 0.2,
        }
    }
}

const EPS: f32 = 1e-6;

impl HogFeatures {
    fn cell_histograms(&self, image: &RgbImage) -> (usize, usize, Vec<f32>) {
        let (w, h) = (image.width() as usize, image.height() as usize);
        let (cw, ch) = (cells_for(w, self.cell_size), cells_for(h, self.cell_size));
        let nb = self.orientations;
        let bin_width = std::f32::consts::PI / nb as f32;
        let raw = image.as_raw();
        let px = |x: usize, y: usize, c: usize| raw[(y * w + x) * 3 + c] as f32;

        let mut hist = vec![0f32; cw * ch * nb];
        for y in 0..h {
            let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for x in 0..w {
                let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (mut gx, mut gy, mut mag2) = (0f32, 0f32, -1f32);
                for c in 0..3 {
                    let dx = px(xp, y, c) - px(xm, y, c);
                    let dy = px(x, yp, c) - px(x, ym, c);
                    let m = dx * dx + dy * dy;
                    if m > mag2 {
                        (gx, gy, mag2) = (dx, dy, m);
                    }
                }
                if mag2 <= 0.0 {
                    continue;
                }
                let mag = mag2.sqrt();
                let mut angle = gy.atan2(gx);
                if angle < 0.0 {
                    angle += std::f32::consts::PI;
                }
                // position relative to bin centers at (k + 0.5) * bin_width
                let pos = angle / bin_width - 0.5;
                let lo = pos.floor();
                let frac = pos - lo;
                let lo = (lo as i64).rem_euclid(nb as i64) as usize;
                let hi = (lo + 1) % nb;
                let cell = ((y / self.cell_size) * cw + x / self.cell_size) * nb;
                hist[cell + lo] += mag * (1.0 - frac);
                hist[cell + hi] += mag * frac;
            }
        }
        (cw, ch, hist)
    }

    fn l2_hys(&self, v: &mut [f32]) {
        let norm = |v: &[f32]| (v.iter().map(|a| a * a).sum::<f32>() + EPS * EPS).sqrt();
        let n = norm(v);
        v.iter_mut().for_each(|a| *a = (*a / n).min(self.clip));
        let n = norm(v);
        v.iter_mut().for_each(|a| *a /= n);
    }
}

impl FeatureExtractor for HogFeatures {
    fn extract(&self, image: &RgbImage) -> Result<FeatureMap> {
        let cs = self.cell_size;
        if (image.width() as usize) < cs || (image.height() as usize) < cs {
            return Err(Error::Backend(format!(
                "{}x{} input is smaller than one {cs}px cell",
                image.width(),
                image.height()
            )));
        }
        let nb = self.orientations;
        let (cw, ch, hist) = self.cell_histograms(image);
        let bw = self.block_cells.min(cw);
        let bh = self.block_cells.min(ch);

        let mut out = vec![0f32; cw * ch * nb];
        let mut hits = vec![0u32; cw * ch];
        let mut block = vec![0f32; bw * bh * nb];
        for by in 0..=(ch - bh) {
            for bx in 0..=(cw - bw) {
                for j in 0..bh {
                    for i in 0..bw {
                        let src = ((by + j) * cw + bx + i) * nb;
                        let dst = (j * bw + i) * nb;
                        block[dst..dst + nb].copy_from_slice(&hist[src..src + nb]);
                    }
                }
                self.l2_hys(&mut block);
                for j in 0..bh {
                    for i in 0..bw {
                        let cell = (by + j) * cw + bx + i;
                        let src = (j * bw + i) * nb;
                        for k in 0..nb {
                            out[cell * nb + k] += block[src + k];
                        }
                        hits[cell] += 1;
                    }
                }
            }
        }
        for (cell, &n) in hits.iter().enumerate() {
            out[cell * nb..(cell + 1) * nb].iter_mut().for_each(|v| *v /= n as f32);
        }
        FeatureMap::new(ch, cw, nb, cs, out)
    }

    fn name(&self) -> String {
        "hog".into()
    }
}
