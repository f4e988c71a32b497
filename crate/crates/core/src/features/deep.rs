//! Pretrained CNN activations read from an ONNX graph.
//!
//! The graph takes one `1 × 3 × H × W` float input and exposes the tapped
//! activation (`1 × C × h × w`) as a named node. An optional JSON sidecar
//! next to the model (`<model path>.json`, e.g. `vgg16.onnx.json`, written by
//! `scripts/export_vgg16.py`) records input normalization and maps layer
//! tags onto node names:
//!
//! ```json
//! { "mean": [0.485, 0.456, 0.406], "std": [0.229, 0.224, 0.225],
//!   "taps": { "layer14": { "output": "features.23", "stride": 16, "channels": 512 } } }
//! ```
//!
//! Without a sidecar the tag is taken as the tensor (or node) name, ImageNet
//! normalization is assumed, and the stride is inferred from the output size.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use image::RgbImage;
use serde::Deserialize;
use tract_onnx::prelude::*;

use super::{cells_for, FeatureExtractor, FeatureMap};
use crate::error::{Error, Result};
use crate::raster::{bicubic_resize, Grid};

#[derive(Clone, Debug, Deserialize)]
pub struct TapInfo {
    pub output: String,
    pub stride: Option<usize>,
    pub channels: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ModelMetadata {
    #[serde(default = "imagenet_mean")]
    pub mean: [f32; 3],
    #[serde(default = "imagenet_std")]
    pub std: [f32; 3],
    #[serde(default)]
    pub taps: HashMap<String, TapInfo>,
}

fn imagenet_mean() -> [f32; 3] {
    [0.485, 0.456, 0.406]
}

fn imagenet_std() -> [f32; 3] {
    [0.229, 0.224, 0.225]
}

impl Default for ModelMetadata {
    fn default() -> Self {
        Self {
            mean: imagenet_mean(),
            std: imagenet_std(),
            taps: HashMap::new(),
        }
    }
}

type Plan = Arc<TypedRunnableModel>;

/// Deep feature backend. Execution plans are compiled lazily per input size
/// and cached behind a mutex, so one instance serves concurrent callers.
pub struct DeepFeatures {
    model: InferenceModel,
    path: PathBuf,
    tag: String,
    tap: TapInfo,
    mean: [f32; 3],
    std: [f32; 3],
    stride: OnceLock<usize>,
    plans: Mutex<HashMap<(usize, usize), Plan>>,
}

impl std::fmt::Debug for DeepFeatures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeepFeatures")
            .field("path", &self.path)
            .field("tag", &self.tag)
            .field("tap", &self.tap)
            .finish()
    }
}

fn backend_err(path: &Path) -> impl Fn(TractError) -> Error + '_ {
    move |e| Error::Backend(format!("{}: {e:#}", path.display()))
}

fn sidecar_path(model: &Path) -> PathBuf {
    let mut p = model.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

impl DeepFeatures {
    pub fn load(path: impl AsRef<Path>, layer_tag: &str) -> Result<Self> {
        let path = path.as_ref();
        let sidecar = sidecar_path(path);
        let meta = if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Backend(format!("{}: {e}", sidecar.display())))?
        } else {
            ModelMetadata::default()
        };
        Self::load_with_metadata(path, layer_tag, meta)
    }

    pub fn load_with_metadata(path: impl AsRef<Path>, layer_tag: &str, meta: ModelMetadata) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "model file not found"),
            ));
        }
        let model = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(backend_err(path))?;
        let tap = meta.taps.get(layer_tag).cloned().unwrap_or(TapInfo {
            output: layer_tag.to_string(),
            stride: None,
            channels: None,
        });
        if model.find_outlet_label(&tap.output).is_none() && model.node_by_name(&tap.output).is_err() {
            return Err(Error::TapMismatch(format!(
                "{} has no tensor or node {:?} for tap {layer_tag:?}",
                path.display(),
                tap.output
            )));
        }
        let stride = OnceLock::new();
        if let Some(s) = tap.stride {
            if s == 0 {
                return Err(Error::TapMismatch("tap stride must be positive".into()));
            }
            let _ = stride.set(s);
        }
        Ok(Self {
            model,
            path: path.to_path_buf(),
            tag: layer_tag.to_string(),
            tap,
            mean: meta.mean,
            std: meta.std,
            stride,
            plans: Mutex::new(HashMap::new()),
        })
    }

    fn plan(&self, width: usize, height: usize) -> Result<Plan> {
        let mut plans = self.plans.lock().expect("plan cache poisoned");
        if let Some(p) = plans.get(&(width, height)) {
            return Ok(p.clone());
        }
        let err = backend_err(&self.path);
        let mut model = self.model.clone();
        model
            .select_outputs_by_name([self.tap.output.as_str()])
            .map_err(&err)?;
        let plan = model
            .with_input_fact(0, f32::fact([1, 3, height, width]).into())
            .map_err(&err)?
            .into_optimized()
            .map_err(&err)?
            .into_runnable()
            .map_err(&err)?;
        plans.insert((width, height), plan.clone());
        Ok(plan)
    }

    /// Runs the graph on `image` as-is and returns `(C, h, w, data)`.
    fn run(&self, image: &RgbImage) -> Result<(usize, usize, usize, Vec<f32>)> {
        let (w, h) = (image.width() as usize, image.height() as usize);
        let raw = image.as_raw();
        let input: Tensor = tract_ndarray::Array4::from_shape_fn((1, 3, h, w), |(_, c, y, x)| {
            (raw[(y * w + x) * 3 + c] as f32 / 255.0 - self.mean[c]) / self.std[c]
        })
        .into();
        let plan = self.plan(w, h)?;
        let out = plan.run(tvec!(input.into())).map_err(backend_err(&self.path))?;
        let out = out[0]
            .to_plain_array_view::<f32>()
            .map_err(backend_err(&self.path))?;
        let shape = out.shape().to_vec();
        if shape.len() != 4 || shape[0] != 1 {
            return Err(Error::TapMismatch(format!(
                "tap {:?} produced shape {shape:?}, expected 1xCxhxw",
                self.tag
            )));
        }
        let (c, oh, ow) = (shape[1], shape[2], shape[3]);
        // NCHW -> cell-major HWC
        let mut data = vec![0f32; c * oh * ow];
        for (ix, &v) in out.indexed_iter() {
            let (ch, y, x) = (ix[1], ix[2], ix[3]);
            data[(y * ow + x) * c + ch] = v;
        }
        Ok((c, oh, ow, data))
    }

    fn stride(&self, image: &RgbImage) -> Result<usize> {
        if let Some(&s) = self.stride.get() {
            return Ok(s);
        }
        // probe at a size every pooling pyramid up to 32 divides evenly
        let pw = (image.width() as usize).div_ceil(32) * 32;
        let ph = (image.height() as usize).div_ceil(32) * 32;
        let probe = resize_rgb(image, pw, ph)?;
        let (_, oh, ow, _) = self.run(&probe)?;
        if oh == 0 || ow == 0 || ph % oh != 0 || pw % ow != 0 || ph / oh != pw / ow {
            return Err(Error::TapMismatch(format!(
                "tap {:?}: {pw}x{ph} input gave {ow}x{oh} output, no integer stride",
                self.tag
            )));
        }
        Ok(*self.stride.get_or_init(|| ph / oh))
    }
}

fn resize_rgb(image: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if (w, h) == (width, height) {
        return Ok(image.clone());
    }
    let mut out = RgbImage::new(width as u32, height as u32);
    for c in 0..3 {
        let plane = Grid::from_fn(w, h, |x, y| image.get_pixel(x as u32, y as u32)[c] as f64);
        let up = bicubic_resize(&plane, width, height)?;
        for (x, y, p) in out.enumerate_pixels_mut() {
            p[c] = up.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

impl FeatureExtractor for DeepFeatures {
    fn extract(&self, image: &RgbImage) -> Result<FeatureMap> {
        let stride = self.stride(image)?;
        let (w, h) = (image.width() as usize, image.height() as usize);
        if w < stride || h < stride {
            return Err(Error::Backend(format!(
                "{w}x{h} input is smaller than one {stride}px cell"
            )));
        }
        let (cw, ch) = (cells_for(w, stride), cells_for(h, stride));
        let input = resize_rgb(image, cw * stride, ch * stride)?;
        let (c, oh, ow, data) = self.run(&input)?;
        if (oh, ow) != (ch, cw) {
            return Err(Error::TapMismatch(format!(
                "tap {:?} at stride {stride}: expected {cw}x{ch} cells, got {ow}x{oh}",
                self.tag
            )));
        }
        if let Some(expect) = self.tap.channels {
            if expect != c {
                return Err(Error::TapMismatch(format!(
                    "tap {:?}: expected {expect} channels, got {c}",
                    self.tag
                )));
            }
        }
        FeatureMap::new(ch, cw, c, stride, data)
    }

    fn name(&self) -> String {
        format!("deep:{}", self.tag)
    }
}
