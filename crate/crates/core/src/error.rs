use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate pose: {0}")]
    DegeneratePose(String),

    #[error("empty clip: at least one frame is required")]
    EmptyClip,

    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("attribute collision: {classes} classes cannot have distinct codes over {bits} attribute bits")]
    AttributeCollision { classes: usize, bits: usize },

    #[error("malformed {kind} data: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("dangling path in manifest sample {sample}: {}", .path.display())]
    DanglingPath { sample: String, path: PathBuf },

    #[error("frame count mismatch for sample {sample}: manifest says {expected}, {} has {found}", .path.display())]
    FrameCountMismatch {
        sample: String,
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("class ids are not dense 0..{expected}: found {found:?}")]
    NonDenseClassIds { expected: usize, found: Vec<usize> },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            kind,
            msg: msg.into(),
        }
    }
}
