use std::io;

use thiserror::Error;

/// Errors produced by the parcelforge library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("open mesh: {0}")]
    OpenMesh(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("zero-area mesh cannot be sampled")]
    ZeroArea,
    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),
    #[error("empty point set")]
    EmptySet,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unstable step; reduce dt")]
    UnstableStep,
    #[error("degenerate sample")]
    DegenerateSample,
    #[error("no model: best consensus has {0} points")]
    NoModel(usize),
    #[error("behind camera")]
    BehindCamera,
    #[error("composition failed after {0} attempts")]
    CompositionFailed(usize),
    #[error("invalid depth: {0}")]
    InvalidDepth(f64),
    #[error("degenerate rotation representation")]
    DegenerateRotation,
    #[error("degenerate face: projected area {0:.3} px^2")]
    DegenerateFace(f64),
    #[error("singular homography")]
    SingularHomography,
    #[error("grid frames differ")]
    GridMismatch,
    #[error("obj parse error at line {line}: {msg}")]
    Obj { line: usize, msg: String },
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("unknown scene id `{0}`")]
    UnknownScene(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
