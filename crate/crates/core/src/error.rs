use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside trajectory range [{start}, {end}] of actor `{actor}`")]
    OutOfRange {
        actor: String,
        t: f64,
        start: f64,
        end: f64,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("zone polygon encloses no pixel centers")]
    EmptyZone,

    #[error("empty detection list")]
    NoDetections,

    #[error("unknown camera `{0}`")]
    UnknownCamera(String),

    #[error("pose outside mechanical range: pan {pan:.3}°, tilt {tilt:.3}°")]
    PoseOutOfRange { pan: f64, tilt: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dangling reference: {kind} `{id}` referenced by {from}")]
    Dangling {
        kind: &'static str,
        id: String,
        from: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
