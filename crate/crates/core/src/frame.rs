use std::path::Path;

use image::{DynamicImage, RgbImage};

use crate::error::{Error, Result};

/// Smallest accepted side, so that stride-16 feature maps keep at least two cells.
pub const MIN_FRAME_SIDE: u32 = 32;

/// 8-bit RGB input frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    image: RgbImage,
}

impl Frame {
    pub fn new(image: RgbImage) -> Result<Self> {
        if image.width() < MIN_FRAME_SIDE || image.height() < MIN_FRAME_SIDE {
            return Err(Error::InvalidFrame(format!(
                "{}x{} is smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}",
                image.width(),
                image.height()
            )));
        }
        Ok(Self { image })
    }

    /// Any decoded image; grayscale and alpha variants are converted to RGB,
    /// which replicates a single gray channel into all three.
    pub fn from_dynamic(image: DynamicImage) -> Result<Self> {
        Self::new(image.into_rgb8())
    }

    /// Decodes a PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })?;
        Self::from_dynamic(img)
    }

    pub fn width(&self) -> usize {
        self.image.width() as usize
    }

    pub fn height(&self) -> usize {
        self.image.height() as usize
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn into_image(self) -> RgbImage {
        self.image
    }
}

impl AsRef<RgbImage> for Frame {
    fn as_ref(&self) -> &RgbImage {
        &self.image
    }
}
