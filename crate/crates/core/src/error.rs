use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] crate::worldmap::MapError),
    #[error(transparent)]
    Spline(#[from] crate::bspline::SplineError),
    #[error(transparent)]
    Search(#[from] crate::pathsearch::SearchError),
    #[error(transparent)]
    Corridor(#[from] crate::corridor::CorridorError),
    #[error(transparent)]
    Net(#[from] crate::nn::NetError),
    #[error(transparent)]
    Agent(#[from] crate::sdcq::AgentError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
