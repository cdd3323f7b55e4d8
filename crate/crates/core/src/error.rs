use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("point outside mesh: ({0}, {1})")]
    OutsideMesh(f64, f64),

    #[error("ill-conditioned degree: accumulated angle {0} rad")]
    IllConditionedDegree(f64),

    #[error("degenerate loop: passes within {0:e} of a zero")]
    DegenerateLoop(f64),

    #[error("unknown critical point {0}")]
    UnknownCriticalPoint(usize),

    #[error("empty region: no vertex within {radius} of ({x}, {y})")]
    EmptyRegion { x: f64, y: f64, radius: f64 },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("unknown scalar channel {0:?}")]
    UnknownChannel(String),

    #[error("task {0} failed twice")]
    TaskFailed(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
