use alloc::string::String;
use core::fmt;

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Shape,
    Data,
    Training,
    Numeric,
    Metric,
    Report,
    Config,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operand had the wrong length or dimensions.
    Shape {
        operand: &'static str,
        expected: usize,
        found: usize,
    },
    /// A series or sample set was too short for the requested operation.
    InsufficientHistory { needed: usize, available: usize },
    /// Generic data-contract violation (empty series, bad dates, bad horizon).
    Data(String),
    /// A gradient entry was NaN or infinite.
    NonFiniteGradient { index: usize },
    /// The training loss became NaN or infinite.
    NonFiniteLoss { epoch: usize },
    /// `k + sum(delta[..=j])` vanished while computing offset corrections.
    ZeroRate { changepoint: usize },
    /// The regression objective could not be evaluated to a finite value.
    Fit(String),
    Metric(String),
    Report(String),
    Config(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape { .. } => ErrorKind::Shape,
            Error::InsufficientHistory { .. } | Error::Data(_) => ErrorKind::Data,
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } | Error::Fit(_) => {
                ErrorKind::Training
            }
            Error::ZeroRate { .. } => ErrorKind::Numeric,
            Error::Metric(_) => ErrorKind::Metric,
            Error::Report(_) => ErrorKind::Report,
            Error::Config(_) => ErrorKind::Config,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                operand,
                expected,
                found,
            } => write!(
                f,
                "shape error: operand `{operand}` expected length {expected}, found {found}"
            ),
            Error::InsufficientHistory { needed, available } => write!(
                f,
                "insufficient history: need at least {needed} observations, have {available}"
            ),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::NonFiniteGradient { index } => {
                write!(f, "training error: non-finite gradient at parameter {index}")
            }
            Error::NonFiniteLoss { epoch } => {
                write!(f, "training error: non-finite loss at epoch {epoch}")
            }
            Error::ZeroRate { changepoint } => write!(
                f,
                "numeric error: growth rate vanishes at changepoint {changepoint}"
            ),
            Error::Fit(msg) => write!(f, "fit error: {msg}"),
            Error::Metric(msg) => write!(f, "metric error: {msg}"),
            Error::Report(msg) => write!(f, "report error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
