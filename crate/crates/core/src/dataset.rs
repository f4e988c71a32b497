//! Evaluation pairs cut from tracking-style sequences.
//!
//! Anchors sit every 50 frames starting at frame 1 (1-based); each anchor is
//! paired with a partner 1 to 10 frames later, drawn from a seeded generator.
//! Sequences listed in an exclusion file are skipped and replacement
//! annotation files override a sequence's ground truth.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Bbox;

pub const ANCHOR_STRIDE: usize = 50;
pub const MAX_INTERVAL: usize = 10;

const GROUND_TRUTH_FILES: &[&str] = &["groundtruth_rect.txt", "groundtruth.txt"];
const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceManifest {
    pub name: String,
    pub frame_paths: Vec<PathBuf>,
    pub annotations: Vec<Bbox>,
    /// Exclusion reason, if the sequence is curated out.
    pub excluded: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub sequence: String,
    /// 1-based frame numbers.
    pub index_a: usize,
    pub index_b: usize,
    /// Annotation of frame `index_b`, center-based.
    pub ground_truth: Bbox,
    pub path_a: PathBuf,
    pub path_b: PathBuf,
}

impl PairRecord {
    pub fn id(&self) -> String {
        format!("{}:{}-{}", self.sequence, self.index_a, self.index_b)
    }
}

/// The interchange file consumed by evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub seed: u64,
    pub pairs: Vec<PairRecord>,
}

impl PairManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Parses one box per line. Four numbers are corner-based `x,y,w,h`; eight
/// numbers are a polygon, reduced to its axis-aligned bounding box.
pub fn parse_ground_truth(text: &str) -> Result<Vec<Bbox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let values: Vec<f64> = line
                .split(|c: char| c == ',' || c == '\t' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Dataset(format!("line {}: {e}", n + 1)))?;
            let b = match values.as_slice() {
                [x, y, w, h] => Bbox::from_corner(*x, *y, *w, *h),
                [_, _, _, _, _, _, _, _] => {
                    let xs = values.iter().step_by(2);
                    let ys = values.iter().skip(1).step_by(2);
                    let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                    let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                    Bbox::from_corner(x0, y0, x1 - x0, y1 - y0)
                }
                other => {
                    return Err(Error::Dataset(format!(
                        "line {}: expected 4 or 8 values, got {}",
                        n + 1,
                        other.len()
                    )))
                }
            };
            b.validate()
                .map_err(|e| Error::Dataset(format!("line {}: {e}", n + 1)))?;
            Ok(b)
        })
        .collect()
}

fn read_boxes(path: &Path) -> Result<Vec<Bbox>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    frames.sort();
    Ok(frames)
}

/// Ordered frame files of a sequence directory: `img/` when present, else the
/// directory itself.
pub fn sequence_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let img_dir = dir.join("img");
    list_images(if img_dir.is_dir() { &img_dir } else { dir })
}

/// Loads a sequence directory: frames per [`sequence_frames`] and a
/// ground-truth file.
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<SequenceManifest> {
    let dir = dir.as_ref();
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Dataset(format!("{}: not a sequence directory", dir.display())))?;
    let frame_paths = sequence_frames(dir)?;
    let gt = GROUND_TRUTH_FILES
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::Dataset(format!("{}: no ground-truth file", dir.display())))?;
    let annotations = read_boxes(&gt)?;
    Ok(SequenceManifest {
        name,
        frame_paths,
        annotations,
        excluded: None,
    })
}

/// Exclusion list: `name reason…` per line; `#` starts a comment.
pub fn parse_exclusions(text: &str) -> HashMap<String, String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut parts = l.splitn(2, char::is_whitespace);
            let name = parts.next().unwrap_or_default().to_string();
            let reason = parts.next().map(str::trim).filter(|r| !r.is_empty()).unwrap_or("excluded");
            (name, reason.to_string())
        })
        .collect()
}

/// Curation inputs applied when loading a dataset root.
#[derive(Clone, Debug, Default)]
pub struct Curation {
    pub exclusions: HashMap<String, String>,
    /// Directory of `<sequence>.txt` files replacing the original annotations.
    pub reannotations: Option<PathBuf>,
}

/// Loads every sequence directory under `root`, sorted by name.
pub fn load_root(root: impl AsRef<Path>, curation: &Curation) -> Result<Vec<SequenceManifest>> {
    let root = root.as_ref();
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let name = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if let Some(reason) = curation.exclusions.get(&name) {
            out.push(SequenceManifest {
                name,
                frame_paths: Vec::new(),
                annotations: Vec::new(),
                excluded: Some(reason.clone()),
            });
            continue;
        }
        let mut seq = load_sequence(&dir)?;
        if let Some(re) = &curation.reannotations {
            let path = re.join(format!("{name}.txt"));
            if path.is_file() {
                seq.annotations = read_boxes(&path)?;
            }
        }
        if seq.annotations.len() != seq.frame_paths.len() {
            return Err(Error::Dataset(format!(
                "{name}: {} frames but {} annotations",
                seq.frame_paths.len(),
                seq.annotations.len()
            )));
        }
        out.push(seq);
    }
    Ok(out)
}

/// Draws one partner per anchor `1, 51, 101, …`; pairs whose partner falls
/// past the end are dropped (the draw still happens).
pub fn build_pairs<R: Rng + ?Sized>(manifest: &SequenceManifest, rng: &mut R) -> Result<Vec<PairRecord>> {
    if let Some(reason) = &manifest.excluded {
        return Err(Error::Dataset(format!("{} is excluded: {reason}", manifest.name)));
    }
    let len = manifest.frame_paths.len();
    if manifest.annotations.len() != len {
        return Err(Error::Dataset(format!(
            "{}: {len} frames but {} annotations",
            manifest.name,
            manifest.annotations.len()
        )));
    }
    let mut pairs = Vec::new();
    for a in (1..=len).step_by(ANCHOR_STRIDE) {
        let b = a + rng.gen_range(1..=MAX_INTERVAL);
        if b > len {
            continue;
        }
        pairs.push(PairRecord {
            sequence: manifest.name.clone(),
            index_a: a,
            index_b: b,
            ground_truth: manifest.annotations[b - 1],
            path_a: manifest.frame_paths[a - 1].clone(),
            path_b: manifest.frame_paths[b - 1].clone(),
        });
    }
    Ok(pairs)
}

pub fn build_pairs_seeded(manifest: &SequenceManifest, seed: u64) -> Result<Vec<PairRecord>> {
    build_pairs(manifest, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Pairs for every included sequence, in order, from one seeded generator.
pub fn build_dataset(manifests: &[SequenceManifest], seed: u64) -> Result<PairManifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for m in manifests.iter().filter(|m| m.excluded.is_none()) {
        pairs.extend(build_pairs(m, &mut rng)?);
    }
    Ok(PairManifest { seed, pairs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    IntervalOutOfRange,
    AnchorStride,
    MissingFile,
    BoxOutOfBounds,
    InvalidBox,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub pair_id: String,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks interval bounds, anchor stride, file existence and box-in-frame.
/// Frame sizes come from decoding the partner image header.
pub fn validate_dataset(records: &[PairRecord]) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |r: &PairRecord, kind, message: String| {
        violations.push(Violation {
            pair_id: r.id(),
            kind,
            message,
        })
    };

    let mut last_anchor: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let interval = r.index_b as i64 - r.index_a as i64;
        if !(1..=MAX_INTERVAL as i64).contains(&interval) {
            push(r, ViolationKind::IntervalOutOfRange, format!("interval out of range: {interval}"));
        }
        let stride_ok = r.index_a >= 1
            && (r.index_a - 1) % ANCHOR_STRIDE == 0
            && last_anchor
                .get(r.sequence.as_str())
                .map_or(true, |&prev| r.index_a == prev + ANCHOR_STRIDE);
        if !stride_ok {
            push(r, ViolationKind::AnchorStride, format!("anchor {} breaks the 50-frame stride", r.index_a));
        }
        last_anchor.insert(r.sequence.as_str(), r.index_a);

        if !r.ground_truth.is_valid() {
            push(r, ViolationKind::InvalidBox, format!("invalid box {:?}", r.ground_truth));
        }
        for p in [&r.path_a, &r.path_b] {
            if !p.is_file() {
                push(r, ViolationKind::MissingFile, format!("missing file {}", p.display()));
            }
        }
        if let Ok((w, h)) = image::image_dimensions(&r.path_b) {
            let frame = Bbox::from_corner(0.0, 0.0, w as f64, h as f64);
            if !frame.contains(&r.ground_truth) {
                push(
                    r,
                    ViolationKind::BoxOutOfBounds,
                    format!("box out of bounds: {} in {w}x{h}", r.ground_truth),
                );
            }
        }
    }
    ValidationReport {
        checked: records.len(),
        violations,
    }
}
