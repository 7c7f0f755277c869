use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: every subsystem needs at least 2 levels")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("slot {slot} out of range for a space with {len} subsystems")]
    SlotOutOfRange { slot: usize, len: usize },

    #[error("model validation failed: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("steady state is degenerate: the trace-constrained system is singular at pivot {pivot}")]
    DegenerateSteadyState { pivot: usize },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("unphysical moment table: {0}")]
    UnphysicalMoments(String),

    #[error("no dressing: the drive amplitude must be positive")]
    NoDressing,

    #[error("trajectory step size too large: state norm underflowed at t = {time}")]
    StepSize { time: f64 },

    #[error("grid too large: {0} points per axis (limit 512)")]
    GridTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
