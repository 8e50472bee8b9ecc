use thiserror::Error;

/// Errors produced by the feasibility engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The starting point already lies in every constraint set, so the
    /// feasibility gauge has a zero denominator.
    #[error("starting point lies in the solution set")]
    StartInSolutionSet,

    /// Cyclic Douglas-Rachford pairs each set with its successor, which needs
    /// at least two sets.
    #[error("cyclic Douglas-Rachford needs at least two sets, got {0}")]
    DegenerateCycle(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("malformed document: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
