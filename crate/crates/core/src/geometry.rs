//! Center-based boxes and their pixel-grid footprint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle stored by center and real-valued extent, in pixels.
///
/// Rounding to the pixel grid is deferred to [`Bbox::pixel_rect`]; all the
/// optimizer updates operate on the real-valued parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PixelRect {
    pub fn width(&self) -> i64 {
        (self.x1 - self.x0).max(0)
    }

    pub fn height(&self) -> i64 {
        (self.y1 - self.y0).max(0)
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn is_within(&self, width: usize, height: usize) -> bool {
        self.x0 >= 0 && self.y0 >= 0 && self.x1 <= width as i64 && self.y1 <= height as i64
    }
}

impl Bbox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Builds a box from the top-left corner convention used by tracking datasets.
    pub fn from_corner(left: f64, top: f64, w: f64, h: f64) -> Self {
        Self::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    pub fn left(&self) -> f64 {
        self.x - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.y - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidBox(format!("{self:?}")))
        }
    }

    /// Pixel footprint: `[round(x − w/2), round(x + w/2)) × [round(y − h/2), round(y + h/2))`.
    pub fn pixel_rect(&self) -> PixelRect {
        PixelRect {
            x0: self.left().round() as i64,
            y0: self.top().round() as i64,
            x1: self.right().round() as i64,
            y1: self.bottom().round() as i64,
        }
    }

    /// Clamps the box into a `width × height` frame, keeping each side at
    /// least `min_side` (or the frame extent when that is smaller).
    pub fn clamp_to(&self, width: usize, height: usize, min_side: f64) -> Bbox {
        let (fw, fh) = (width as f64, height as f64);
        let w = clamp_side(self.w, min_side, fw);
        let h = clamp_side(self.h, min_side, fh);
        Bbox {
            x: self.x.clamp(w / 2.0, fw - w / 2.0),
            y: self.y.clamp(h / 2.0, fh - h / 2.0),
            w,
            h,
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Bbox {
        Bbox::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Same center, both sides multiplied by `factor`.
    pub fn scale(&self, factor: f64) -> Bbox {
        Bbox::new(self.x, self.y, self.w * factor, self.h * factor)
    }

    pub fn contains(&self, other: &Bbox) -> bool {
        const EPS: f64 = 1e-9;
        other.left() >= self.left() - EPS
            && other.top() >= self.top() - EPS
            && other.right() <= self.right() + EPS
            && other.bottom() <= self.bottom() + EPS
    }

    pub fn center_distance(&self, other: &Bbox) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

fn clamp_side(side: f64, min_side: f64, extent: f64) -> f64 {
    let lo = min_side.min(extent);
    if side.is_nan() {
        lo
    } else {
        side.clamp(lo, extent)
    }
}

impl std::fmt::Display for Bbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}
