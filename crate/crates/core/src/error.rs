use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// File-level failure, always carrying the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed record in a line-oriented file (1-based line numbers).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Invalid configuration value or unknown key.
    #[error("config error: {0}")]
    Config(String),

    /// Precondition violation on an operation argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Patch too small to contain any pixel pair for the requested offset.
    #[error("degenerate patch: {0}")]
    DegeneratePatch(String),

    /// Every (patch, radius, orientation) combination was degenerate.
    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    /// A semantic-entropy provider returned something that is not a
    /// probability distribution.
    #[error("semantic provider contract violated: {0}")]
    ProviderContract(String),

    /// The curriculum filter kept no questions.
    #[error("curriculum exhausted: strategy {strategy} kept no questions at epoch {epoch}")]
    CurriculumExhausted { strategy: String, epoch: usize },

    /// Non-finite quantity encountered during an update; the step is rejected.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training abort with the step index at which it happened.
    #[error("numerical abort at step {step}")]
    Numerical { step: usize },
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
