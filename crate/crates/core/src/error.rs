use thiserror::Error;

use crate::train::TrainRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty {0}")]
    Empty(&'static str),

    #[error("{what}: expected {expected} values, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} value {value} at pixel {pixel} is outside {range}")]
    OutOfRange {
        what: &'static str,
        pixel: usize,
        value: f64,
        range: &'static str,
    },

    #[error("degenerate direction: norm {norm:e} is below {eps:e}")]
    DegenerateDirection { norm: f64, eps: f64 },

    #[error("degenerate normal at pixel {pixel}: norm {norm:e}")]
    DegenerateNormal { pixel: usize, norm: f64 },

    #[error("normal matrix is rank deficient (smallest singular value {sigma:e})")]
    DegenerateGeometry { sigma: f64 },

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize, record: Box<TrainRecord> },

    #[error("epoch {epoch}, image {image}: {source}")]
    Training {
        epoch: usize,
        image: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported image format at byte {offset}: {message}")]
    UnsupportedFormat { offset: usize, message: String },

    #[error("malformed file at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("corrupt field at line {line}: {message}")]
    CorruptField { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by numerical degeneracy rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateDirection { .. }
            | Error::DegenerateNormal { .. }
            | Error::DegenerateGeometry { .. }
            | Error::Divergence { .. } => true,
            Error::Training { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
