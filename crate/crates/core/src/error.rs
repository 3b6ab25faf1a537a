use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the simulation modules. The message prefix names the
/// module that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("[wulff] assumption {assumption} violated at index {index}: {detail}")]
    Assumption {
        assumption: &'static str,
        index: usize,
        detail: String,
    },

    #[error("[wulff] supporting lines {0} and {1} are nearly parallel")]
    DegenerateIntersection(usize, usize),

    #[error("[wulff] invalid input: {0}")]
    InvalidShape(String),

    #[error("[ode] facet {index} has nonpositive length {length:e} at t = {t}")]
    Domain { index: usize, length: f64, t: f64 },

    #[error("[ode] no facet generation before t_max = {t_max}")]
    NoGeneration { t_max: f64 },

    #[error("[ode] invalid parameters: {0}")]
    OdeParams(String),

    #[error("[levelset] nonfinite update at node ({i}, {j}) = ({x}, {y}), t = {t}")]
    NonFinite { i: i64, j: i64, x: f64, y: f64, t: f64 },

    #[error("[levelset] invalid configuration: {0}")]
    LevelSetConfig(String),

    #[error("[height] {0}")]
    Height(String),

    #[error("[experiments] {0}")]
    Experiment(String),

    #[error("[cli] {0}")]
    Usage(String),

    #[error("[io] {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("[io] {0}")]
    Csv(#[from] csv::Error),

    #[error("[io] json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 usage, 2 numeric failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 3,
            _ => 2,
        }
    }
}
