use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing cell (id={id}, t={t})")]
    MissingCell { id: String, t: String },
    #[error("non-numeric value {value:?} in column {column} at (id={id}, t={t})")]
    NonNumeric {
        id: String,
        t: String,
        column: String,
        value: String,
    },
    #[error("duplicate row (id={id}, t={t})")]
    DuplicateRow { id: String, t: String },
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("lag {max_lag} leaves fewer than 2 usable periods out of {periods}")]
    LagTooLarge { max_lag: usize, periods: usize },
    #[error("panel has {periods} periods, at least {required} required")]
    TooShort { periods: usize, required: usize },
    #[error("singular design in {context}: eigenvalue ratio {ratio:e}")]
    SingularDesign { context: String, ratio: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("degenerate variance for coordinate {coord}: {value:e}")]
    DegenerateVariance { coord: usize, value: f64 },
    #[error("singular restriction matrix: eigenvalue ratio {ratio:e}")]
    SingularRestriction { ratio: f64 },
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("{got} bootstrap replicates available, at least {required} required")]
    TooFewReplicates { got: usize, required: usize },
    #[error("bootstrap weight scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("{failed} of {total} replications failed (limit 1%)")]
    ExcessiveFailures { failed: usize, total: usize },
    #[error("non-stationary specification: {0}")]
    NonStationarySpec(String),
    #[error("no closed form available for {0}")]
    NoClosedForm(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_) | Error::InvalidConfig(_) | Error::Parse { .. } => {
                ErrorCategory::Usage
            }
            Error::BadLevel(_) => ErrorCategory::Usage,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::MissingCell { .. }
            | Error::NonNumeric { .. }
            | Error::DuplicateRow { .. }
            | Error::InvalidPanel(_)
            | Error::LagTooLarge { .. }
            | Error::TooShort { .. }
            | Error::NotApplicable(_)
            | Error::SchemeMismatch(_)
            | Error::NonStationarySpec(_) => ErrorCategory::Data,
            Error::SingularDesign { .. }
            | Error::DegenerateVariance { .. }
            | Error::SingularRestriction { .. }
            | Error::TooFewReplicates { .. }
            | Error::ExcessiveFailures { .. }
            | Error::NoClosedForm(_) => ErrorCategory::Numerical,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
            Error::MissingCell { .. } => "MissingCell",
            Error::NonNumeric { .. } => "NonNumeric",
            Error::DuplicateRow { .. } => "DuplicateRow",
            Error::InvalidPanel(_) => "InvalidPanel",
            Error::LagTooLarge { .. } => "LagTooLarge",
            Error::TooShort { .. } => "TooShort",
            Error::SingularDesign { .. } => "SingularDesign",
            Error::NotApplicable(_) => "NotApplicable",
            Error::DegenerateVariance { .. } => "DegenerateVariance",
            Error::SingularRestriction { .. } => "SingularRestriction",
            Error::BadLevel(_) => "BadLevel",
            Error::TooFewReplicates { .. } => "TooFewReplicates",
            Error::SchemeMismatch(_) => "SchemeMismatch",
            Error::ExcessiveFailures { .. } => "ExcessiveFailures",
            Error::NonStationarySpec(_) => "NonStationarySpec",
            Error::NoClosedForm(_) => "NoClosedForm",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse { .. } => "Parse",
        }
    }

    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}
