use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("malformed stream: {0}")]
    MalformedStream(String),

    #[error("unsupported stream: {0}")]
    UnsupportedStream(String),

    #[error("unrecognized container format")]
    UnrecognizedFormat,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("labeling failed for {path}: {reason}")]
    Label { path: String, reason: String },

    #[error("empty distribution: {0}")]
    EmptyDistribution(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("empty evaluation set")]
    EmptyEval,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing cells: {}", format_cells(.0))]
    MissingCell(Vec<(String, String)>),

    #[error("cannot join prediction to metadata: {0}")]
    Join(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_cells(cells: &[(String, String)]) -> String {
    cells
        .iter()
        .map(|(r, c)| format!("({r}, {c})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedStream(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedStream(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
