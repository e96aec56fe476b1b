use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {}x{}, got {}x{}", .expected.0, .expected.1, .actual.0, .actual.1)]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },

    #[error("no segments: label map contains only unlabeled pixels")]
    NoSegments,

    #[error("degenerate contour")]
    DegenerateContour,

    #[error("degenerate polygon")]
    DegeneratePolygon,

    #[error("empty mask")]
    EmptyMask,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stroke program parse error at byte {offset} (line {line}, column {column}): {message}")]
    ProgramParse { offset: usize, line: usize, column: usize, message: String },

    #[error("unsupported stroke program version {found} (this build reads version {expected})")]
    ProgramVersion { found: u32, expected: u32 },

    #[error("invalid stroke program: {0}")]
    ProgramInvalid(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("stage `{stage}` failed{}: {source}", .entity.as_ref().map(|e| format!(" on {e}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        entity: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image { path: path.into(), source }
    }

    pub(crate) fn in_stage(self, stage: &'static str, entity: Option<String>) -> Self {
        Error::Stage { stage, entity, source: Box::new(self) }
    }
}
