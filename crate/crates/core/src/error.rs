//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected 15 or 16 fields, found {found}")]
    FieldCount { line: usize, found: usize },

    #[error("line {line}: field `{field}` has invalid value `{value}`")]
    Parse {
        line: usize,
        field: &'static str,
        value: String,
    },

    #[error("invalid box ({left}, {top}, {right}, {bottom}): {reason}")]
    Geometry {
        left: f64,
        top: f64,
        right: f64,
        bottom: f64,
        reason: &'static str,
    },

    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("split: {0}")]
    Split(String),

    #[error("unknown series tag `{0}`")]
    UnknownTag(String),

    #[error("series has no frames")]
    EmptySeries,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Pipeline(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_file(path: impl Into<PathBuf>, source: Error) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(source),
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::FieldCount { .. } => "format",
            Error::Parse { .. } => "parse",
            Error::Geometry { .. } => "geometry",
            Error::Line { source, .. } | Error::InFile { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Split(_) => "split",
            Error::UnknownTag(_) => "unknown_tag",
            Error::EmptySeries => "empty_series",
            Error::InvalidParam(_) => "invalid_param",
            Error::Config(_) => "config",
            Error::Pipeline(_) => "pipeline",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
