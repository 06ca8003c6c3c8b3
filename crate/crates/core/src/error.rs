use std::path::PathBuf;

/// Errors produced by the library.
///
/// The variants fall into two families: contract violations (bad arguments,
/// mismatched shapes, unrepresentable configurations) and I/O or format
/// failures. The CLI maps them to exit codes 2 and 3 respectively.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point is behind the projector (z = {z})")]
    BehindProjector { z: f64 },

    #[error("cell of {cell_deg}° is smaller than the grid pitch; minimum representable cell is {min_cell_deg:.5}°")]
    UnrepresentablePattern { cell_deg: f64, min_cell_deg: f64 },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("no pixels to evaluate")]
    NoPixels,

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("measurement failed: {0}")]
    Measurement(String),

    #[error("value {value} m is outside the 16-bit centimeter range (max 655.35 m)")]
    OutOfRange { value: f64 },

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

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

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures caused by the file system or by file contents, as
    /// opposed to caller contract violations.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Image { .. } | Error::Json { .. } | Error::Format { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
