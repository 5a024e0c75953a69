use thiserror::Error;

use crate::qsim::QsimError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("pixel {index} has value {value}, outside [0, 1]")]
    PixelRange { index: usize, value: f64 },
    #[error("{kind} ansatz needs at least {min} qubits, got {n_qubits}")]
    TooFewQubits {
        kind: &'static str,
        n_qubits: usize,
        min: usize,
    },
    #[error("malformed record: {0}")]
    Record(String),
    #[error("invalid attack spec: {0}")]
    AttackSpec(String),
    #[error("no images to evaluate")]
    EmptyImageSet,
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {0} outside 0..=9")]
    LabelRange(u8),
    #[error("requested {requested} items but only {available} are available")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
