use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid torus spec: {0}")]
    InvalidSpec(String),

    #[error("field violates Hermitian symmetry at mode ({n1}, {n2}): defect {defect:e}")]
    NotHermitian { n1: i64, n2: i64, defect: f64 },

    #[error("requested cutoff {requested} exceeds field cutoff {available}")]
    CutoffTooLarge { requested: usize, available: usize },

    #[error("field cutoffs disagree: {0} vs {1}")]
    CutoffMismatch(usize, usize),

    #[error("unsupported Lebesgue exponent p = {0} (expected 2, 4 or inf)")]
    UnsupportedExponent(f64),

    #[error("heat smoothing time must be non-negative, got {0}")]
    NegativeSmoothing(f64),

    #[error("polynomial degree {degree} exceeds the supported maximum {max}")]
    DegreeTooHigh { degree: usize, max: usize },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration left the finite state space at t = {t}")]
    BlowUp { t: f64 },

    #[error("path {stream} of seed {seed} failed: {source}")]
    PathFailed {
        seed: u64,
        stream: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("coupling did not contract up to A = {a}; envelope violated at t = {t}")]
    NonContraction { a: f64, t: f64 },

    #[error("negative sample {value} at index {index}")]
    NegativeSample { index: usize, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(#[from] SnapshotError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Failures while decoding a field snapshot. No partial field is returned.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("bad magic {found:?}, expected \"HPQ1\"")]
    BadMagic { found: Vec<u8> },

    #[error("unsupported version {found}, expected {expected}")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("truncated: need {expected} bytes, file has {found}")]
    Truncated { expected: usize, found: usize },

    #[error("{extra} trailing bytes after the payload")]
    TrailingBytes { extra: usize },

    #[error("invalid header: {0}")]
    InvalidHeader(String),
}
