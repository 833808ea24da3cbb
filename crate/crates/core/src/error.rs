use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported QAM order {0}; expected one of 4, 16, 32, 64, 128, 256, 1024")]
    UnsupportedOrder(usize),

    #[error("invalid SAPSK specification: {0}")]
    InvalidSapsk(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("degenerate point set: {0}")]
    Degenerate(&'static str),

    #[error("invalid impairment parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
