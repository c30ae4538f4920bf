use alloc::string::String;

use crate::dataset::PhaseLabel;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("phase label {0} is outside 0..=5")]
    LabelOutOfRange(i64),
    #[error("unknown phase name `{0}`")]
    UnknownPhase(String),
    #[error("class {0} has no rows in the label sources")]
    ClassAbsent(PhaseLabel),
    #[error("empty data")]
    EmptyData,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in feature {feature} of row {row}")]
    NonFinite { row: usize, feature: usize },
    #[error("unit {0} is not on the map")]
    InvalidUnit(usize),
    #[error("no labeled samples")]
    NoLabeledData,
    #[error("{predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
