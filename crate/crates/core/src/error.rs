use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed document. `context` names the document kind or file.
    #[error("{context}: {message}")]
    Parse { context: String, message: String },

    /// Well-formed document whose values break an invariant.
    #[error("{context}: {message}")]
    Validation { context: String, message: String },

    #[error("image {context}: {message}")]
    Image { context: String, message: String },

    #[error("face box {x:.1},{y:.1} {w:.1}x{h:.1} lies outside the {width}x{height} frame")]
    FaceOutsideFrame {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        width: u32,
        height: u32,
    },

    #[error("degenerate landmarks: {0}")]
    DegenerateLandmarks(String),

    #[error("degenerate destination quad: {0}")]
    DegenerateQuad(String),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("backend {role}: {message}")]
    Backend { role: &'static str, message: String },

    #[error("labels reference frames absent from the report: {}", format_indices(.0))]
    MissingFrames(Vec<u64>),
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph file not found: {0}")]
    MissingFile(PathBuf),

    #[error("graph {path}: declared input {declared:?} does not match expected {expected:?}")]
    ShapeMismatch {
        path: PathBuf,
        declared: Vec<usize>,
        expected: Vec<usize>,
    },

    #[error("graph {path}: unsupported operator: {message}")]
    UnsupportedOperator { path: PathBuf, message: String },

    #[error("graph {path}: {message}")]
    Invalid { path: PathBuf, message: String },

    #[error("graph backend not compiled in (enable the `graph` feature)")]
    NotCompiled,
}

/// Coarse failure class, used by the command-line layer to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input documents or arguments.
    Validation,
    /// IO, backend or model failures.
    Runtime,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn validation(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Validation {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::MissingFrames(_)
            | Error::DegenerateLandmarks(_)
            | Error::DegenerateQuad(_) => ErrorClass::Validation,
            _ => ErrorClass::Runtime,
        }
    }
}

fn format_indices(indices: &[u64]) -> String {
    indices
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}
