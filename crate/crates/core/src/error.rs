use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AadError {
    #[error("format error: {0}")]
    Format(String),

    #[error("length error: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: class id {class_id} out of range (classes = {classes})")]
    ClassRange {
        line: usize,
        class_id: usize,
        classes: usize,
    },

    #[error("no history at pixel ({x}, {y})")]
    NoHistory { x: usize, y: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<AadError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AadError {
    /// Attaches a file path to an error raised while handling that file.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        AadError::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input or configuration.
    pub fn is_input_error(&self) -> bool {
        match self {
            AadError::State(_) => false,
            AadError::File { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, AadError>;
