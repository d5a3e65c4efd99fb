use thiserror::Error;

/// Errors raised by the signal, session, model and control layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported downsample from {from_hz} Hz to {to_hz} Hz")]
    UnsupportedDownsample { from_hz: f64, to_hz: f64 },
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("invalid filter design: {0}")]
    InvalidDesign(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("signal too short: {len} samples, need more than {needed}")]
    SignalTooShort { len: usize, needed: usize },
    #[error("invalid rate: expected {expected} Hz, got {actual} Hz")]
    InvalidRate { expected: f64, actual: f64 },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("corrupt session: {0}")]
    CorruptSession(String),
    #[error("unsupported format version: {0}")]
    UnsupportedVersion(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid interval [{start}, {end}) for {len} samples")]
    InvalidInterval { start: usize, end: usize, len: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("gradient check failed: {0}")]
    CheckFailed(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("undefined correlation: zero rank variance")]
    UndefinedCorrelation,
    #[error("degenerate sample: zero variance")]
    DegenerateSample,
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("warming up: {have} of {need} history steps")]
    WarmingUp { have: usize, need: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
