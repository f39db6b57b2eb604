use std::path::PathBuf;

use spreadcast_core::ErrorKind;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_TRAINING: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("input not found: {}", .0.display())]
    InputNotFound(PathBuf),

    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("training failed for every region")]
    AllFailed,

    #[error(transparent)]
    Core(#[from] spreadcast_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => EXIT_USAGE,
            Error::AllFailed => EXIT_TRAINING,
            Error::Core(e) => match e.kind() {
                ErrorKind::Config => EXIT_USAGE,
                ErrorKind::Training | ErrorKind::Numeric => EXIT_TRAINING,
                ErrorKind::Shape | ErrorKind::Data | ErrorKind::Metric | ErrorKind::Report => EXIT_DATA,
            },
            Error::InputNotFound(_)
            | Error::Parse { .. }
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Csv { .. } => EXIT_DATA,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
