use std::fmt;

/// Error conditions shared by all modules of the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// The source carries no usable photon statistics for the requested
    /// quantity (e.g. all squeezing parameters are zero).
    DegenerateSource(String),
    /// The measured gains/QBERs cannot be produced by any channel acting on
    /// the declared source; a real protocol run would abort here.
    InconsistentObservables(String),
    /// A configured enumeration or truncation budget was exhausted.
    ResourceLimit(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DegenerateSource(msg) => write!(f, "degenerate source: {msg}"),
            Error::InconsistentObservables(msg) => {
                write!(f, "inconsistent observables: {msg}")
            }
            Error::ResourceLimit(msg) => write!(f, "resource limit: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
