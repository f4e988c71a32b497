#![allow(dead_code)]

use image::{Rgb, RgbImage};
use motionbox_core::{Bbox, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PATCH_COLOR: [u8; 3] = [230, 20, 210];

/// Static gray texture in [60, 160] with a uniquely colored patch that moves
/// between the two frames.
#[derive(Clone, Debug)]
pub struct PatchFixture {
    pub frame1: Frame,
    pub frame2: Frame,
    /// Patch in frame 1, center-based.
    pub start: Bbox,
    /// Patch in frame 2, center-based.
    pub truth: Bbox,
}

pub fn textured_background(size: u32, rng: &mut ChaCha8Rng) -> RgbImage {
    RgbImage::from_fn(size, size, |_, _| {
        let t = rng.gen_range(60..=160u8);
        Rgb([t, t, t])
    })
}

pub fn paint(image: &mut RgbImage, x0: u32, y0: u32, w: u32, h: u32, color: [u8; 3]) {
    for y in y0..(y0 + h).min(image.height()) {
        for x in x0..(x0 + w).min(image.width()) {
            image.put_pixel(x, y, Rgb(color));
        }
    }
}

/// 24×24 patch displaced by 10 px along one of eight compass directions
/// (diagonals rounded to 7 px per axis).
pub fn patch_fixture(seed: u64) -> PatchFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = 128u32;
    let bg = textured_background(size, &mut rng);
    let side = 24u32;
    let (dx, dy) = [(10, 0), (7, 7), (0, 10), (-7, 7), (-10, 0), (-7, -7), (0, -10), (7, -7)][rng.gen_range(0..8)];
    let lo = 12i32;
    let hi = (size - side) as i32 - 12;
    let x1 = rng.gen_range(lo..=hi);
    let y1 = rng.gen_range(lo..=hi);
    let step = |p: i32, d: i32| if (lo..=hi).contains(&(p + d)) { p + d } else { p - d };
    let (x2, y2) = (step(x1, dx), step(y1, dy));
    let (mut a, mut b) = (bg.clone(), bg);
    paint(&mut a, x1 as u32, y1 as u32, side, side, PATCH_COLOR);
    paint(&mut b, x2 as u32, y2 as u32, side, side, PATCH_COLOR);
    let s = side as f64;
    PatchFixture {
        frame1: Frame::new(a).unwrap(),
        frame2: Frame::new(b).unwrap(),
        start: Bbox::from_corner(x1 as f64, y1 as f64, s, s),
        truth: Bbox::from_corner(x2 as f64, y2 as f64, s, s),
    }
}
