//! Per-frame feature extraction behind one contract: a dense `h × w × C`
//! map whose cells cover `stride × stride` pixels of the source frame, with
//! `h = ceil(H / stride)` and `w = ceil(W / stride)`.
//!
//! Three backends exist: raw pixels, HOG, and (with the `deep` feature) a
//! pretrained convolutional network loaded from an ONNX file.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

#[cfg(feature = "deep")]
pub mod deep;
pub mod hog;

pub use hog::HogFeatures;

/// Dense feature tensor, cell-major: value `(row, col, channel)` is stored at
/// `(row * width + col) * channels + channel`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    stride: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        stride: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if stride == 0 || channels == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature map {height}x{width}x{channels} stride {stride}"
            )));
        }
        if values.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {height}x{width}x{channels} feature map",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Backend("non-finite feature value".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            stride,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Channel vector of one cell.
    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.channels;
        &self.values[start..start + self.channels]
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.height, self.width, self.channels, self.stride)
    }
}

/// Number of cells along an axis of `extent` pixels.
pub fn cells_for(extent: usize, stride: usize) -> usize {
    extent.div_ceil(stride)
}

/// A feature backend. Implementations are immutable after construction and
/// may be shared across threads; `extract` must be deterministic.
pub trait FeatureExtractor: Send + Sync {
    fn extract(&self, image: &RgbImage) -> Result<FeatureMap>;

    fn name(&self) -> String;
}

/// Pixel intensities scaled to `[0, 1]`, stride 1, three channels.
#[derive(Clone, Copy, Debug, Default)]
pub struct RawFeatures;

impl FeatureExtractor for RawFeatures {
    fn extract(&self, image: &RgbImage) -> Result<FeatureMap> {
        let values = image.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        FeatureMap::new(image.height() as usize, image.width() as usize, 3, 1, values)
    }

    fn name(&self) -> String {
        "raw".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Raw,
    Hog,
    Deep,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(FeatureKind::Raw),
            "hog" => Ok(FeatureKind::Hog),
            "deep" => Ok(FeatureKind::Deep),
            other => Err(Error::Backend(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Which backend to build. `layer_tag` and `model_path` only matter for `Deep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBackendSpec {
    pub kind: FeatureKind,
    pub layer_tag: Option<String>,
    pub model_path: Option<PathBuf>,
}

impl FeatureBackendSpec {
    pub fn raw() -> Self {
        Self {
            kind: FeatureKind::Raw,
            layer_tag: None,
            model_path: None,
        }
    }

    pub fn hog() -> Self {
        Self {
            kind: FeatureKind::Hog,
            ..Self::raw()
        }
    }

    pub fn deep(model_path: impl Into<PathBuf>, layer_tag: impl Into<String>) -> Self {
        Self {
            kind: FeatureKind::Deep,
            layer_tag: Some(layer_tag.into()),
            model_path: Some(model_path.into()),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn FeatureExtractor>> {
        match self.kind {
            FeatureKind::Raw => Ok(Arc::new(RawFeatures)),
            FeatureKind::Hog => Ok(Arc::new(HogFeatures::default())),
            FeatureKind::Deep => self.build_deep(),
        }
    }

    #[cfg(feature = "deep")]
    fn build_deep(&self) -> Result<Arc<dyn FeatureExtractor>> {
        let path = self
            .model_path
            .as_ref()
            .ok_or_else(|| Error::Backend("deep features need a model path".into()))?;
        let tag = self
            .layer_tag
            .as_deref()
            .ok_or_else(|| Error::Backend("deep features need a layer tag".into()))?;
        Ok(Arc::new(deep::DeepFeatures::load(path, tag)?))
    }

    #[cfg(not(feature = "deep"))]
    fn build_deep(&self) -> Result<Arc<dyn FeatureExtractor>> {
        Err(Error::Backend(
            "built without the `deep` feature; rebuild with --features deep".into(),
        ))
    }
}

/// One-shot extraction. Building a deep backend loads the model, so callers
/// processing many frames should `build()` once and reuse the extractor.
pub fn extract(frame: &Frame, spec: &FeatureBackendSpec) -> Result<FeatureMap> {
    spec.build()?.extract(frame.image())
}
