//! Summed-area tables over probability maps.

use crate::error::{Error, Result};
use crate::geometry::{Bbox, PixelRect};
use crate::raster::{Grid, ProbabilityMap};

/// `(width + 1) × (height + 1)` prefix-sum table: entry `(x, y)` holds the sum
/// of all source values with column `< x` and row `< y`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralImage {
    table: Grid<f64>,
}

impl IntegralImage {
    pub fn new(map: &Grid<f64>) -> Self {
        let (w, h) = map.dims();
        let mut table = Grid::new(w + 1, h + 1, 0.0);
        for y in 0..h {
            let mut row_sum = 0.0;
            for x in 0..w {
                row_sum += map.get(x, y);
                let above = table.get(x + 1, y);
                table.set(x + 1, y + 1, above + row_sum);
            }
        }
        Self { table }
    }

    /// Width of the source map.
    pub fn width(&self) -> usize {
        self.table.width() - 1
    }

    /// Height of the source map.
    pub fn height(&self) -> usize {
        self.table.height() - 1
    }

    /// Raw table entry `(x, y)`, with `x ∈ [0, width]` and `y ∈ [0, height]`.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.table.get(x, y)
    }

    /// Sum over the half-open pixel rectangle. Caller guarantees bounds.
    #[inline]
    pub fn rect_sum_unchecked(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let t = &self.table;
        t.get(x1, y1) - t.get(x1, y0) - t.get(x0, y1) + t.get(x0, y0)
    }

    pub fn rect_sum(&self, rect: PixelRect) -> Result<f64> {
        if !rect.is_within(self.width(), self.height()) {
            return Err(Error::OutOfBounds(format!(
                "{rect:?} outside {}x{}; clamp the box first",
                self.width(),
                self.height()
            )));
        }
        if rect.area() == 0 {
            return Err(Error::DegenerateBox);
        }
        Ok(self.rect_sum_unchecked(
            rect.x0 as usize,
            rect.y0 as usize,
            rect.x1 as usize,
            rect.y1 as usize,
        ))
    }
}

pub fn integral_image(map: &ProbabilityMap) -> IntegralImage {
    IntegralImage::new(map.grid())
}

/// Sum of map values over the rounded pixel footprint of `bbox`.
pub fn box_sum(integral: &IntegralImage, bbox: &Bbox) -> Result<f64> {
    integral.rect_sum(bbox.pixel_rect())
}
