//! Dense single-channel rasters, binary masks, probability maps and bicubic
//! resampling.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};

/// Row-major `width × height` raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Binary raster; `true` marks a set pixel.
pub type Mask = Grid<bool>;

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl Grid<bool> {
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn to_f64(&self) -> Grid<f64> {
        self.map(|v| if v { 1.0 } else { 0.0 })
    }

    /// Pointwise OR of two masks of equal size.
    pub fn or(&self, other: &Mask) -> Result<Mask> {
        if !self.same_dims(other) {
            return Err(Error::ShapeMismatch("mask sizes differ".into()));
        }
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect(),
        })
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_gray(&self.to_gray_image(), path)
    }
}

impl Grid<f64> {
    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Scalar raster whose every value lies in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap(Grid<f64>);

impl ProbabilityMap {
    /// Checks the `[0, 1]` bound instead of coercing.
    pub fn try_new(grid: Grid<f64>) -> Result<Self> {
        if let Some(v) = grid.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ShapeMismatch(format!("probability value {v} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    /// Clamps every value into `[0, 1]`; NaN becomes 0.
    pub fn clamped(mut grid: Grid<f64>) -> Self {
        for v in grid.as_mut_slice() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self(grid)
    }

    pub fn from_mask(mask: &Mask) -> Self {
        Self(mask.to_f64())
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// Pointwise product; the result stays in `[0, 1]`.
    pub fn product(&self, other: &ProbabilityMap) -> Result<ProbabilityMap> {
        if !self.0.same_dims(&other.0) {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.0.dims(),
                other.0.dims()
            )));
        }
        let data = self.values().iter().zip(other.values()).map(|(a, b)| a * b).collect();
        Ok(Self(Grid::from_vec(self.width(), self.height(), data)?))
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width() as u32, self.height() as u32, |x, y| {
            Luma([(self.get(x as usize, y as usize) * 255.0).round() as u8])
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_gray(&self.to_gray_image(), path)
    }
}

fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Catmull-Rom cubic kernel (a = −0.5).
fn catmull_rom(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
    } else {
        0.0
    }
}

/// Per-destination-sample taps along one axis.
fn axis_taps(src: usize, dst: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            // pixel-center alignment, source coordinate clamped to the edge samples
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let base = s.floor();
            let t = s - base;
            let base = base as i64;
            let mut idx = [0usize; 4];
            let mut w = [0f64; 4];
            for k in 0..4 {
                let off = k as i64 - 1;
                idx[k] = (base + off).clamp(0, src as i64 - 1) as usize;
                w[k] = catmull_rom(t - off as f64);
            }
            (idx, w)
        })
        .collect()
}

/// Resamples `src` to `dst_width × dst_height` with a separable Catmull-Rom
/// kernel and replicated edges.
pub fn bicubic_resize(src: &Grid<f64>, dst_width: usize, dst_height: usize) -> Result<Grid<f64>> {
    if src.width() == 0 || src.height() == 0 {
        return Err(Error::ShapeMismatch("cannot resize an empty raster".into()));
    }
    if dst_width == 0 || dst_height == 0 {
        return Err(Error::ShapeMismatch(format!(
            "destination size {dst_width}x{dst_height} has a zero dimension"
        )));
    }
    let xt = axis_taps(src.width(), dst_width);
    let yt = axis_taps(src.height(), dst_height);

    let mut horiz = Vec::with_capacity(dst_width * src.height());
    for y in 0..src.height() {
        let row = src.row(y);
        for (idx, w) in &xt {
            horiz.push(idx.iter().zip(w).map(|(&i, &wk)| row[i] * wk).sum::<f64>());
        }
    }

    let mut out = Vec::with_capacity(dst_width * dst_height);
    for (idx, w) in &yt {
        for x in 0..dst_width {
            out.push(
                idx.iter()
                    .zip(w)
                    .map(|(&i, &wk)| horiz[i * dst_width + x] * wk)
                    .sum::<f64>(),
            );
        }
    }
    Grid::from_vec(dst_width, dst_height, out)
}

/// Upsamples a binary mask: bicubic resize, clamp to `[0, 1]`, then cut at
/// `threshold` (inclusive).
pub fn resize_mask(mask: &Mask, width: usize, height: usize, threshold: f64) -> Result<Mask> {
    if mask.dims() == (width, height) {
        return Ok(mask.clone());
    }
    let up = bicubic_resize(&mask.to_f64(), width, height)?;
    Ok(up.map(|v| v.clamp(0.0, 1.0) >= threshold))
}
