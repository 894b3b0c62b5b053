use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PadError>;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum PadError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Sample {
        context: String,
        #[source]
        source: Box<PadError>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error at {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl PadError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PadError::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the identifier of the sample that caused it.
    pub fn for_sample(self, sample_id: &str, frame: usize) -> Self {
        PadError::Sample {
            context: format!("sample {sample_id} frame {frame}"),
            source: Box::new(self),
        }
    }

    /// True for failures that come from the filesystem rather than from the data.
    pub fn is_io(&self) -> bool {
        match self {
            PadError::Io { .. } | PadError::Image { .. } => true,
            PadError::Sample { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::error::PadError::Shape(format!($($arg)*))
    };
}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::PadError::Invalid(format!($($arg)*))
    };
}

pub(crate) use invalid;
pub(crate) use shape_err;
