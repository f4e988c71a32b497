use std::path::PathBuf;

/// Errors produced anywhere in the detection, dataset and evaluation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("box out of bounds: {0}")]
    OutOfBounds(String),

    #[error("degenerate box: rounded area is zero")]
    DegenerateBox,

    #[error("no motion between frames")]
    NoMotion,

    #[error("no motion evidence: masked histogram is empty")]
    NoMotionEvidence,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("feature backend: {0}")]
    Backend(String),

    #[error("model/tap mismatch: {0}")]
    TapMismatch(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("unknown ablation method {0}")]
    UnknownMethod(u32),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips stage labels and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_no_motion(&self) -> bool {
        matches!(self.root(), Error::NoMotion | Error::NoMotionEvidence)
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            Error::NoMotion => Error::NoMotion,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
