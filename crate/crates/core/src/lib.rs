//! Class-agnostic moving-target detection from image pairs.
//!
//! The detector works in three stages:
//!
//! 1. **Motion**: difference the feature maps of the two frames, collapse
//!    channels, binarize at a fraction of the maximum and upsample the mask.
//! 2. **Appearance**: a Bayesian color posterior from the masked versus full
//!    color histograms, and a Gaussian location prior centered on the eroded
//!    moving area.
//! 3. **Box search**: forward-difference ascent of a mean-probability score
//!    over `(x, y, w, h)` on the product of both maps, with integral-image sums.
//!
//! Around the detector sit the [`dataset`] builder, the [`eval`] harness with
//! the [`ablation`] runner, and the [`trackassist`] adapter that refines a
//! tracker's box with the same machinery.
//!
//! ```no_run
//! use motionbox_core::{detect, DetectorConfig, FeatureBackendSpec, Frame};
//!
//! # fn main() -> motionbox_core::Result<()> {
//! let a = Frame::load("a.png")?;
//! let b = Frame::load("b.png")?;
//! let found = detect(&a, &b, &FeatureBackendSpec::raw(), &DetectorConfig::default())?;
//! println!("{} score {}", found.bbox, found.score);
//! # Ok(())
//! # }
//! ```

pub mod ablation;
pub mod appearance;
pub mod boxopt;
pub mod config;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod eval;
pub mod features;
pub mod frame;
pub mod geometry;
pub mod integral;
pub mod motion;
pub mod raster;
pub mod trackassist;

pub use appearance::{ColorHistogram, ColorPosterior, MotionCenter};
pub use boxopt::{OptimizerTrace, TargetMap, Termination};
pub use config::{Accumulation, DetectorConfig};
pub use detect::{detect, DetectOptions, Detection, Detector, Diagnostics, TargetSource};
pub use error::{Error, Result};
pub use features::{FeatureBackendSpec, FeatureExtractor, FeatureKind, FeatureMap};
pub use frame::Frame;
pub use geometry::{Bbox, PixelRect};
pub use integral::{box_sum, integral_image, IntegralImage};
pub use motion::{DifferenceMap, MotionMask};
pub use raster::{bicubic_resize, Grid, Mask, ProbabilityMap};
