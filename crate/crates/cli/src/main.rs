//! `motionbox`: moving-target detection, dataset building, evaluation,
//! ablation, plotting and assisted tracking from the command line.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use motionbox_core::ablation::{parse_method_list, run_ablation, table_csv, FeatureRegistry};
use motionbox_core::dataset::{
    build_dataset, load_root, parse_exclusions, sequence_frames, validate_dataset, Curation, PairManifest,
};
use motionbox_core::eval::{evaluate, filter_by_tag, parse_tags};
use motionbox_core::trackassist::{baseline_track, boxes_csv};
use motionbox_core::{Bbox, Detector, DetectorConfig, Error, FeatureBackendSpec, FeatureKind, Frame, Result};

#[derive(Parser, Debug)]
#[command(name = "motionbox", version, about = "Class-agnostic moving-target detection from image pairs")]
struct Cli {
    /// Seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect the moving target in an image pair; prints `x,y,w,h,score`.
    Detect(DetectArgs),
    /// Cut evaluation pairs from a directory of sequences.
    MakeDataset(MakeDatasetArgs),
    /// Evaluate one detector configuration on a pair manifest.
    Eval(EvalArgs),
    /// Run the module ablation over a pair manifest.
    Ablate(AblateArgs),
    /// Render success and precision plots from a curves CSV.
    Plot(PlotArgs),
    /// Track a target through a sequence with the NCC baseline tracker.
    Track(TrackArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeatureArg {
    Raw,
    Hog,
    Deep,
}

#[derive(Args, Debug)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "raw")]
    features: FeatureArg,
    /// ONNX model for `--features deep`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Layer tag from the model's sidecar metadata.
    #[arg(long, default_value = "layer14")]
    layer: String,
    /// TOML file overriding detector tunables.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl BackendArgs {
    fn spec(&self) -> Result<FeatureBackendSpec> {
        let kind = match self.features {
            FeatureArg::Raw => FeatureKind::Raw,
            FeatureArg::Hog => FeatureKind::Hog,
            FeatureArg::Deep => FeatureKind::Deep,
        };
        if kind == FeatureKind::Deep && self.model.is_none() {
            return Err(Error::Config("--features deep requires --model <path>".into()));
        }
        Ok(FeatureBackendSpec {
            kind,
            layer_tag: Some(self.layer.clone()),
            model_path: self.model.clone(),
        })
    }

    fn detector(&self) -> Result<Detector> {
        Detector::new(self.spec()?.build()?, load_config(self.config.as_deref())?)
    }
}

fn load_config(path: Option<&Path>) -> Result<DetectorConfig> {
    match path {
        Some(p) => DetectorConfig::load(p),
        None => Ok(DetectorConfig::default()),
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long, num_args = 2, value_names = ["IMG1", "IMG2"], required = true)]
    pair: Vec<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    /// Write the feature- and frame-resolution motion masks as PNG here.
    #[arg(long)]
    dump_masks: Option<PathBuf>,
    /// Write the color, location and target probability maps as PNG here.
    #[arg(long)]
    dump_maps: Option<PathBuf>,
    /// Write the optimizer trace as CSV.
    #[arg(long)]
    dump_trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MakeDatasetArgs {
    #[arg(long)]
    root: PathBuf,
    /// Sequences to skip, one `name reason` per line.
    #[arg(long)]
    exclude: Option<PathBuf>,
    /// Directory of `<sequence>.txt` replacement annotations.
    #[arg(long)]
    reannotate: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    curves: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Sequence attribute file, `name tag1 tag2 …` per line.
    #[arg(long, requires = "tag")]
    tags: Option<PathBuf>,
    /// Only evaluate sequences carrying this tag.
    #[arg(long, requires = "tags")]
    tag: Option<String>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value = "0-10")]
    methods: String,
    #[arg(long)]
    out: PathBuf,
    /// ONNX model providing the layer3 and layer14 taps.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long)]
    seq: PathBuf,
    /// Corner-based `x,y,w,h` in the first frame.
    #[arg(long)]
    init: String,
    #[arg(long, value_enum, default_value = "on")]
    assist: Toggle,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    out: PathBuf,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn run_detect(args: &DetectArgs) -> Result<()> {
    let detector = args.backend.detector()?;
    let frame1 = Frame::load(&args.pair[0])?;
    let frame2 = Frame::load(&args.pair[1])?;
    let det = detector.detect(&frame1, &frame2)?;
    let diag = &det.diagnostics;

    if let Some(dir) = &args.dump_masks {
        create_dir(dir)?;
        diag.motion.feature_mask.save_png(&dir.join("feature_mask.png"))?;
        diag.motion.frame_mask.save_png(&dir.join("frame_mask.png"))?;
    }
    if let Some(dir) = &args.dump_maps {
        create_dir(dir)?;
        if let Some(m) = &diag.color_map {
            m.save_png(&dir.join("color_map.png"))?;
        }
        if let Some(m) = &diag.location_map {
            m.save_png(&dir.join("location_map.png"))?;
        }
        diag.target.map().save_png(&dir.join("target_map.png"))?;
    }
    if let Some(path) = &args.dump_trace {
        let csv = diag
            .trace
            .as_ref()
            .map(|t| t.to_csv())
            .unwrap_or_else(|| "iter,x,y,w,h,score\n".into());
        write_file(path, csv)?;
    }
    let b = det.bbox;
    println!("{},{},{},{},{}", b.x, b.y, b.w, b.h, det.score);
    Ok(())
}

fn run_make_dataset(args: &MakeDatasetArgs, seed: u64) -> Result<()> {
    let exclusions = match &args.exclude {
        Some(p) => parse_exclusions(&std::fs::read_to_string(p).map_err(|e| io_error(p, e))?),
        None => Default::default(),
    };
    let curation = Curation {
        exclusions,
        reannotations: args.reannotate.clone(),
    };
    let sequences = load_root(&args.root, &curation)?;
    let manifest = build_dataset(&sequences, seed)?;
    let report = validate_dataset(&manifest.pairs);
    for v in &report.violations {
        tracing::warn!(pair = %v.pair_id, kind = ?v.kind, "{}", v.message);
    }
    tracing::info!(
        sequences = sequences.len(),
        pairs = manifest.pairs.len(),
        violations = report.violations.len(),
        "dataset built"
    );
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    manifest.save(&args.out)
}

fn load_pairs(path: &Path, tags: Option<&Path>, tag: Option<&str>) -> Result<Vec<motionbox_core::dataset::PairRecord>> {
    let manifest = PairManifest::load(path)?;
    match (tags, tag) {
        (Some(t), Some(tag)) => {
            let text = std::fs::read_to_string(t).map_err(|e| io_error(t, e))?;
            Ok(filter_by_tag(&manifest.pairs, &parse_tags(&text), tag))
        }
        _ => Ok(manifest.pairs),
    }
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let pairs = load_pairs(&args.pairs, args.tags.as_deref(), args.tag.as_deref())?;
    let detector = args.backend.detector()?;
    let result = evaluate(&pairs, &detector, args.jobs)?;
    write_file(&args.out, result.results_csv())?;
    write_file(&args.curves, result.curves_csv())?;
    tracing::info!(pairs = pairs.len(), auc = result.auc, pre30 = result.pre30, "evaluation done");
    Ok(())
}

fn run_ablate(args: &AblateArgs) -> Result<()> {
    let ids = parse_method_list(&args.methods)?;
    let pairs = PairManifest::load(&args.pairs)?.pairs;
    let registry = FeatureRegistry::standard(args.model.as_deref())?;
    let cfg = load_config(args.config.as_deref())?;
    let rows = run_ablation(&pairs, &ids, &registry, &cfg, args.jobs)?;
    write_file(&args.out, table_csv(&rows))
}

fn parse_init(text: &str) -> Result<Bbox> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--init expects x,y,w,h, got {text:?}")))?;
    match values.as_slice() {
        [x, y, w, h] => {
            let b = Bbox::from_corner(*x, *y, *w, *h);
            b.validate()?;
            Ok(b)
        }
        _ => Err(Error::Config(format!("--init expects x,y,w,h, got {text:?}"))),
    }
}

fn run_track(args: &TrackArgs) -> Result<()> {
    let init = parse_init(&args.init)?;
    let paths = sequence_frames(&args.seq)?;
    if paths.is_empty() {
        return Err(Error::Dataset(format!("{}: no frames", args.seq.display())));
    }
    let frames = paths.iter().map(Frame::load).collect::<Result<Vec<_>>>()?;
    let cfg = load_config(args.backend.config.as_deref())?;
    let backend: Option<Arc<dyn motionbox_core::FeatureExtractor>> = match args.assist {
        Toggle::On => Some(args.backend.spec()?.build()?),
        Toggle::Off => None,
    };
    let boxes = baseline_track(&frames, init, backend.as_deref(), &cfg)?;
    write_file(&args.out, boxes_csv(&boxes))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Detect(a) => run_detect(a),
        Command::MakeDataset(a) => run_make_dataset(a, cli.seed),
        Command::Eval(a) => run_eval(a),
        Command::Ablate(a) => run_ablate(a),
        Command::Plot(a) => plot::run(&a.curves, &a.out),
        Command::Track(a) => run_track(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
