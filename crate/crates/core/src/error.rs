use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("n_samples must be a power of two >= 2, got {0}")]
    NotPowerOfTwo(usize),
    #[error("window must be positive and finite, got {0} ps")]
    BadWindow(f64),
    #[error("component length mismatch: grid has {expected} samples, u has {u}, v has {v}")]
    LengthMismatch { expected: usize, u: usize, v: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("dip depth must lie in [0, 1], got {0}")]
    BadDipDepth(f64),
    #[error("dip width must be positive, got {0} ps")]
    BadDipWidth(f64),
    #[error("cw power and noise amplitude must be non-negative")]
    BadSeedLevel,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("field became non-finite in segment '{segment}' at z = {z_m:.4} m")]
    NonFinite { segment: String, z_m: f64 },
    #[error("invalid fiber segment '{segment}': {reason}")]
    InvalidSegment { segment: String, reason: String },
    #[error("invalid step size {0} km")]
    InvalidStep(f64),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config range error: {key} = {value}: {invariant}")]
    Range {
        key: String,
        value: String,
        invariant: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot too short: {got} bytes, need at least {need}")]
    Truncated { got: usize, need: usize },
    #[error("bad snapshot magic {0:?}")]
    BadMagic([u8; 8]),
    #[error("unsupported component count {0}, expected 2")]
    Components(u64),
    #[error("snapshot header invalid: {0}")]
    Header(#[from] GridError),
    #[error("snapshot length {got} does not match header (expected {expected} bytes)")]
    SizeMismatch { got: usize, expected: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("empty sweep axis: {0}")]
    EmptyAxis(&'static str),
    #[error("negative smf length {0} m")]
    NegativeLength(f64),
    #[error(transparent)]
    Run(#[from] RunError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid cavity: {0}")]
    Cavity(String),
}
