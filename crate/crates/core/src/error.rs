use alloc::string::String;

use crate::fock::Level;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("duplicate internal level {0}")]
    DuplicateLevel(Level),
    #[error("level {0} is not part of the basis")]
    UnknownLevel(Level),
    #[error("ion index {ion} out of range for a {n_ions}-ion chain")]
    InvalidIon { ion: usize, n_ions: usize },
    #[error("phonon number {n} exceeds the truncation n_max = {n_max}")]
    PhononOutOfRange { n: usize, n_max: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not Hermitian")]
    NotHermitian,
    #[error("projector set is incomplete or not orthogonal (deviation {0:e})")]
    IncompleteProjectors(f64),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("scheme needs {needed} auxiliary levels but {available} are configured")]
    InsufficientAuxLevels { needed: usize, available: usize },
    #[error("time integration did not converge (step-halving deviation {deviation:e})")]
    NonConvergence { deviation: f64 },
    #[error("no records to aggregate")]
    EmptyRecords,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
