use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("link #{index} ({user}, {object}) out of range for {users} users x {objects} objects")]
    LinkOutOfRange {
        index: usize,
        user: u32,
        object: u32,
        users: usize,
        objects: usize,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probe set is empty: {0}")]
    EmptyProbe(String),

    #[error("not enough eligible users: {0}")]
    NotEnoughUsers(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
