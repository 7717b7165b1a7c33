use thiserror::Error;

/// Errors raised by mesh construction, simulation, learning and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chain property violated: D{0}*D{1} has a nonzero entry")]
    ChainViolation(usize, usize),
    #[error("cell reference {index} out of range for degree {degree} (count {count})")]
    BadReference { degree: usize, index: usize, count: usize },
    #[error("degenerate cell {0}: tail equals head")]
    DegenerateCell(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("bad mesh dimension: {0}")]
    BadDimension(String),
    #[error("meshing failure: {0}")]
    MeshingFailure(String),
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error("non-positive mass at node {0}")]
    NonPositiveMass(usize),
    #[error("non-finite state at frame {frame}")]
    NonFiniteState { frame: usize },
    #[error("wavenumber ({0}, {1}) is not commensurate with the periodic box")]
    NonCommensurate(f64, f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("projection amplitude vanished in most frames")]
    ZeroModeAmplitude,
    #[error("trajectory too short: need at least {need} frames, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("zero total energy")]
    ZeroEnergy,
    #[error("zero reference field")]
    ZeroField,
    #[error("amplitude/phase fit is singular")]
    SingularFit,
    #[error("unknown ablation variant `{0}`")]
    UnknownVariant(String),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
