//! Fixtures shared by the benchmarks.

use image::{Rgb, RgbImage};
use motionbox_core::{Bbox, Frame, Grid, ProbabilityMap};

/// Deterministic gray texture in [60, 160].
fn texture(x: u32, y: u32) -> u8 {
    let h = x.wrapping_mul(73_856_093) ^ y.wrapping_mul(19_349_663);
    60 + (h % 101) as u8
}

/// Textured frames with a magenta patch moving by `(dx, dy)`; returns the
/// frames and the patch box in the second frame.
pub fn moving_patch_pair(size: u32, patch: u32, dx: u32, dy: u32) -> (Frame, Frame, Bbox) {
    let (x0, y0) = (size / 3, size / 3);
    let draw = |px: u32, py: u32| {
        RgbImage::from_fn(size, size, |x, y| {
            if (px..px + patch).contains(&x) && (py..py + patch).contains(&y) {
                Rgb([230, 20, 210])
            } else {
                let t = texture(x, y);
                Rgb([t, t, t])
            }
        })
    };
    let f1 = Frame::new(draw(x0, y0)).expect("frame size");
    let f2 = Frame::new(draw(x0 + dx, y0 + dy)).expect("frame size");
    let p = patch as f64;
    let gt = Bbox::from_corner((x0 + dx) as f64, (y0 + dy) as f64, p, p);
    (f1, f2, gt)
}

/// Map with one all-ones rectangle on a faint ramp.
pub fn block_map(size: usize) -> ProbabilityMap {
    let (a, b) = (size / 4, size / 2 + size / 8);
    let grid = Grid::from_fn(size, size, |x, y| {
        if (a..b).contains(&x) && (a..b).contains(&y) {
            1.0
        } else {
            0.05 * (x + y) as f64 / (2 * size) as f64
        }
    });
    ProbabilityMap::try_new(grid).expect("values in [0,1]")
}
