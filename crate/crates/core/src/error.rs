use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty channel after truncation")]
    EmptyChannel,

    #[error("zero-energy channel")]
    ZeroEnergy,

    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unsupported m-sequence register length {0} (supported: 2..=20)")]
    UnsupportedRegister(u32),

    #[error("training rank-deficient: {0}; use a regularized estimator (rzf/mmse) or a longer training sequence")]
    TrainingRankDeficient(String),

    #[error("grid too narrow: |cf| = {magnitude:.3e} at u = {u_max:.4e}; use U >= {suggested_u:.4e}")]
    GridTooNarrow {
        magnitude: f64,
        u_max: f64,
        suggested_u: f64,
    },

    #[error("negative pdf ripple too large: clipped mass {0:.3e} exceeds 1e-4")]
    PdfRipple(f64),

    #[error("empty sample set")]
    EmptySamples,

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid configuration:\n{0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
