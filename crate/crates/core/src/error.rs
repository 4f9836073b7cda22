use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while decoding or validating EMB1 and score files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?} at byte 0 (expected \"EMB1\")")]
    BadMagic { found: [u8; 4] },

    #[error("truncated header: {len} bytes, need at least 12")]
    TruncatedHeader { len: usize },

    #[error("dimension is zero (byte offset 4)")]
    ZeroDim,

    #[error("empty sequence: frame count is zero (byte offset 8)")]
    EmptySequence,

    #[error("payload length mismatch at byte offset {offset}: header declares {expected} payload bytes, file has {actual}")]
    PayloadLength {
        offset: u64,
        expected: u64,
        actual: u64,
    },

    #[error(
        "non-finite value {value} in frame {frame}, component {component} (byte offset {offset})"
    )]
    NonFinite {
        frame: usize,
        component: usize,
        offset: u64,
        value: f32,
    },

    #[error("frame {frame} has zero norm (byte offset {offset})")]
    ZeroNormFrame { frame: usize, offset: u64 },

    #[error("line {line}: unknown label {token:?} (expected bonafide or spoof)")]
    UnknownLabel { line: usize, token: String },

    #[error("line {line}: cannot parse score {token:?}")]
    BadScore { line: usize, token: String },

    #[error("line {line}: expected `<label> <score>`")]
    MalformedLine { line: usize },

    #[error("score file contains no trials")]
    EmptyScores,
}

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("frame count mismatch: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },

    #[error("non-finite cost entry at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },

    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("max_iters must be at least 1")]
    ZeroIterations,

    #[error("k must be at least 1")]
    ZeroK,

    #[error("coupling row {row} has zero mass and cannot be renormalized")]
    ZeroRow { row: usize },

    #[error("invalid embedding sequence: {0}")]
    InvalidSequence(String),

    #[error("target pool is empty")]
    EmptyPool,

    #[error("score set needs at least one {0} trial")]
    MissingClass(&'static str),

    #[error("non-finite score in trial {0}")]
    NonFiniteScore(usize),

    #[error("need at least 2 frames for Gaussian statistics, got {0}")]
    TooFewFrames(usize),

    #[error("symmetric eigendecomposition did not converge")]
    EigenFailure,

    #[error("invalid cluster spec: {0}")]
    InvalidClusterSpec(String),
}

/// Top-level error for file-backed operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error(transparent)]
    Ot(#[from] OtError),

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
