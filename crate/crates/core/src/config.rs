use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How per-channel feature differences collapse into one scalar per cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// `Σ_c |Δ|`
    #[default]
    Absolute,
    /// `Σ_c Δ²`, kept for ablation comparisons.
    Squared,
}

/// Tunables of the detector. Every field has a default, so a config file only
/// lists what it overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Cells with difference `>= ratio * max` are marked as moving.
    pub binarization_ratio: f64,
    pub histogram_bins_per_channel: u32,
    /// Gaussian prior sigma as a fraction of the frame extent, per axis.
    pub gaussian_sigma_fraction: f64,
    /// Weight of the size reward `(w + h) / (W + H)` in the box score.
    pub penalty_lambda: f64,
    pub learning_rate: f64,
    /// Finite-difference probe step, pixels.
    pub perturbation: f64,
    pub max_iterations: u32,
    /// Cut applied to the bicubically upsampled binary mask.
    pub upsample_rebinarize_threshold: f64,
    /// Smallest box side kept by the optimizer's clamp.
    pub min_box_side: f64,
    pub accumulation: Accumulation,
    /// Count masked-out pixels as black in the motion histogram. Off by
    /// default; only for fidelity experiments.
    pub count_masked_as_black: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            binarization_ratio: 0.8,
            histogram_bins_per_channel: 16,
            gaussian_sigma_fraction: 0.2,
            penalty_lambda: 0.05,
            learning_rate: 100.0,
            perturbation: 1.0,
            max_iterations: 100,
            upsample_rebinarize_threshold: 0.5,
            min_box_side: 4.0,
            accumulation: Accumulation::Absolute,
            count_masked_as_black: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.binarization_ratio > 0.0 && self.binarization_ratio < 1.0) {
            return bad("binarization_ratio must lie in (0, 1)");
        }
        let bins = self.histogram_bins_per_channel;
        if bins == 0 || bins > 256 || 256 % bins != 0 {
            return bad("histogram_bins_per_channel must divide 256");
        }
        if !(self.gaussian_sigma_fraction > 0.0) {
            return bad("gaussian_sigma_fraction must be positive");
        }
        if !self.penalty_lambda.is_finite() || !self.learning_rate.is_finite() {
            return bad("penalty_lambda and learning_rate must be finite");
        }
        if !(self.perturbation > 0.0) {
            return bad("perturbation must be positive");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.upsample_rebinarize_threshold > 0.0 && self.upsample_rebinarize_threshold <= 1.0) {
            return bad("upsample_rebinarize_threshold must lie in (0, 1]");
        }
        if !(self.min_box_side >= 1.0) {
            return bad("min_box_side must be at least 1");
        }
        Ok(())
    }

    /// Parses TOML text (`key = value` per field).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
