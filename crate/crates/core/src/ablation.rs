//! The eleven-method module ablation: feature choice crossed with the
//! binarization, location prior, color posterior and box-search switches.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::config::DetectorConfig;
use crate::dataset::PairRecord;
use crate::detect::{DetectOptions, Detector, TargetSource};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalResult};
use crate::features::{FeatureExtractor, HogFeatures, RawFeatures};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AblationFeature {
    Layer3,
    Layer14,
    Hog,
    Raw,
}

impl AblationFeature {
    pub const ALL: [AblationFeature; 4] = [Self::Layer3, Self::Layer14, Self::Hog, Self::Raw];

    pub fn label(self) -> &'static str {
        match self {
            Self::Layer3 => "Layer3",
            Self::Layer14 => "Layer14",
            Self::Hog => "HOG",
            Self::Raw => "RAW",
        }
    }

    /// Tag looked up in the deep model's sidecar.
    pub fn layer_tag(self) -> Option<&'static str> {
        match self {
            Self::Layer3 => Some("layer3"),
            Self::Layer14 => Some("layer14"),
            _ => None,
        }
    }
}

/// One column of the ablation table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AblationMethod {
    pub id: u32,
    pub features: Vec<AblationFeature>,
    pub bin: bool,
    pub lpc: bool,
    pub cpc: bool,
    pub sgd: bool,
}

impl AblationMethod {
    pub fn detect_options(&self) -> DetectOptions {
        let target = match (self.cpc, self.lpc) {
            (true, true) => TargetSource::ColorAndLocation,
            (true, false) => TargetSource::ColorOnly,
            (false, true) => TargetSource::DifferenceAndLocation,
            (false, false) => TargetSource::MotionMask,
        };
        DetectOptions {
            target,
            optimize: self.sgd,
        }
    }
}

/// The eleven configurations, in table order.
pub fn standard_methods() -> Vec<AblationMethod> {
    use AblationFeature::*;
    let m = |id, features: &[AblationFeature], lpc, cpc, sgd| AblationMethod {
        id,
        features: features.to_vec(),
        bin: true,
        lpc,
        cpc,
        sgd,
    };
    vec![
        m(0, &[Raw], false, false, false),
        m(1, &[Raw], true, true, true),
        m(2, &[Layer14], true, true, true),
        m(3, &[Layer3], true, true, true),
        m(4, &[Hog], true, true, true),
        m(5, &[Layer3, Layer14], true, true, true),
        m(6, &[Layer3, Layer14, Hog], true, true, true),
        m(7, &[Layer14], false, false, true),
        m(8, &[Layer14], false, true, true),
        m(9, &[Layer14], true, false, true),
        m(10, &[Layer14], true, true, false),
    ]
}

pub fn method(id: u32) -> Result<AblationMethod> {
    standard_methods()
        .into_iter()
        .find(|m| m.id == id)
        .ok_or(Error::UnknownMethod(id))
}

/// Parses `0-10`, `2,7-9`, … into method ids, rejecting unknown ones.
pub fn parse_method_list(text: &str) -> Result<Vec<u32>> {
    let mut ids = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parse = |s: &str| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::Config(format!("bad method id {s:?}")))
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    return Err(Error::Config(format!("empty method range {part:?}")));
                }
                ids.extend(a..=b);
            }
            None => ids.push(parse(part)?),
        }
    }
    for &id in &ids {
        method(id)?;
    }
    Ok(ids)
}

/// Feature backends by ablation feature.
#[derive(Clone, Default)]
pub struct FeatureRegistry {
    backends: HashMap<AblationFeature, Arc<dyn FeatureExtractor>>,
}

impl FeatureRegistry {
    /// RAW and HOG always; the two deep taps when a model is given.
    pub fn standard(model: Option<&Path>) -> Result<Self> {
        let mut reg = Self::default();
        reg.insert(AblationFeature::Raw, Arc::new(RawFeatures));
        reg.insert(AblationFeature::Hog, Arc::new(HogFeatures::default()));
        if let Some(path) = model {
            reg.insert_deep(path)?;
        }
        Ok(reg)
    }

    #[cfg(feature = "deep")]
    fn insert_deep(&mut self, path: &Path) -> Result<()> {
        for f in [AblationFeature::Layer3, AblationFeature::Layer14] {
            let tag = f.layer_tag().expect("deep feature");
            self.insert(f, Arc::new(crate::features::deep::DeepFeatures::load(path, tag)?));
        }
        Ok(())
    }

    #[cfg(not(feature = "deep"))]
    fn insert_deep(&mut self, _path: &Path) -> Result<()> {
        Err(Error::Backend("built without the `deep` feature".into()))
    }

    pub fn insert(&mut self, feature: AblationFeature, backend: Arc<dyn FeatureExtractor>) {
        self.backends.insert(feature, backend);
    }

    pub fn get(&self, feature: AblationFeature) -> Result<Arc<dyn FeatureExtractor>> {
        self.backends
            .get(&feature)
            .cloned()
            .ok_or_else(|| Error::Backend(format!("no backend registered for {}", feature.label())))
    }

    pub fn detector(&self, method: &AblationMethod, cfg: &DetectorConfig) -> Result<Detector> {
        let backends = method
            .features
            .iter()
            .map(|f| self.get(*f))
            .collect::<Result<Vec<_>>>()?;
        Detector::fused(backends, cfg.clone(), method.detect_options())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub method: AblationMethod,
    /// Area under the success curve.
    pub sr: f64,
    pub pre30: f64,
    #[serde(skip)]
    pub result: EvalResult,
}

pub fn run_ablation(
    pairs: &[PairRecord],
    method_ids: &[u32],
    registry: &FeatureRegistry,
    cfg: &DetectorConfig,
    jobs: usize,
) -> Result<Vec<AblationRow>> {
    method_ids
        .iter()
        .map(|&id| {
            let method = method(id)?;
            let detector = registry.detector(&method, cfg)?;
            tracing::info!(method = id, pairs = pairs.len(), "running ablation method");
            let result = evaluate(pairs, &detector, jobs)?;
            Ok(AblationRow {
                sr: result.auc,
                pre30: result.pre30,
                method,
                result,
            })
        })
        .collect()
}

/// CSV in the table's layout: one row per switch, one column per method.
pub fn table_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("Methods");
    for r in rows {
        let _ = write!(out, ",{}", r.method.id);
    }
    out.push('\n');
    let mark = |b: bool| if b { "x" } else { "" };
    for f in AblationFeature::ALL {
        out.push_str(f.label());
        for r in rows {
            let _ = write!(out, ",{}", mark(r.method.features.contains(&f)));
        }
        out.push('\n');
    }
    let switches: [(&str, fn(&AblationMethod) -> bool); 4] = [
        ("BIN", |m| m.bin),
        ("LPC", |m| m.lpc),
        ("CPC", |m| m.cpc),
        ("SGD", |m| m.sgd),
    ];
    for (label, get) in switches {
        out.push_str(label);
        for r in rows {
            let _ = write!(out, ",{}", mark(get(&r.method)));
        }
        out.push('\n');
    }
    out.push_str("SR");
    for r in rows {
        let _ = write!(out, ",{:.3}", r.sr);
    }
    out.push_str("\nPRE(30)");
    for r in rows {
        let _ = write!(out, ",{:.3}", r.pre30);
    }
    out.push('\n');
    out
}
