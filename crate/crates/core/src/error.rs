use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible density/coverage pair: {0}")]
    InfeasibleLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported band {0} GHz (supported bands: 4.6, 8.2, 15, 28 GHz)")]
    UnsupportedBand(f64),

    #[error("path has zero length")]
    ZeroLengthPath,

    #[error("channel impulse response carries no energy")]
    ZeroChannel,

    #[error("array mismatch: {0}")]
    ArrayMismatch(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("no base-station site fits the network area")]
    NoSites,

    #[error("open street area is only {0:.4} of the network area; cannot drop UEs")]
    CrowdedLayout(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
