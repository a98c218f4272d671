use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("confidence {0} is outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("class index {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("epoch {epoch} exceeds the total of {total} epochs")]
    EpochOutOfRange { epoch: usize, total: usize },
    #[error("loss magnitudes must be positive (nll = {nll}, soft ece = {soft_ece})")]
    NonPositiveLoss { nll: f64, soft_ece: f64 },
}
