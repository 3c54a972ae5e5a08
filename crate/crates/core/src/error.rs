use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// `line` is 0 when the sequence did not come from a file.
    #[error("{}invalid base '{ch}' in sequence '{name}'", line_prefix(*.line))]
    InvalidBase { line: usize, name: String, ch: char },

    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("cannot extract a year from strain name '{0}'")]
    Year(String),

    #[error("unresolved strain names: {}", .0.join(", "))]
    Linkage(Vec<String>),

    #[error("unknown strain '{0}'")]
    UnknownStrain(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("sequence '{name}' has length {len}, shorter than k={k}")]
    TooShort { name: String, len: usize, k: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("k mismatch: table has k={table}, sequence has k={sequence}")]
    KMismatch { table: usize, sequence: usize },

    #[error("class label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("unsupported task: {0}")]
    UnsupportedTask(String),

    #[error("task mismatch: model was trained for {model}, requested {requested}")]
    TaskMismatch { model: String, requested: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn line_prefix(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("line {line}: ")
    }
}

impl Error {
    /// True when the error was caused by bad user input rather than a bug or
    /// an environment failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

/// Reads a file to a string, attaching the path to any failure.
pub fn read_to_string(path: impl AsRef<std::path::Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
}
