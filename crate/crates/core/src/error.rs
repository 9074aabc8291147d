use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot step a terminal state")]
    TerminalStep,

    #[error("action {action} is not valid for {env} ({num_actions} actions)")]
    InvalidAction {
        env: &'static str,
        action: usize,
        num_actions: usize,
    },

    #[error("episode {episode} was truncated by the step cap; undiscounted returns are undefined")]
    TruncatedEpisode { episode: usize },

    #[error("objective became non-finite in the {block} block at outer iteration {iteration}")]
    Divergence { block: &'static str, iteration: usize },

    #[error("linear system is singular")]
    Singular,

    #[error("every state was excluded from MAPVE (|V*| below {threshold})")]
    AllExcluded { threshold: f64 },

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

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
