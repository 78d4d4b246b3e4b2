use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated file: header declares {expected} bytes of payload, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("time slice [{start_s}, {end_s}) selects no frames")]
    EmptySlice { start_s: f64, end_s: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("prototype belongs to recording '{prototype}', sequence is '{sequence}'")]
    Provenance { prototype: String, sequence: String },
    #[error("smoothing window of {window} frames exceeds sequence length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("recording '{recording_id}' lasts {duration_s} s, at least {required_s} s required")]
    RecordingTooShort {
        recording_id: String,
        duration_s: f64,
        required_s: f64,
    },
    #[error("label windows overlap: {0}")]
    OverlappingWindows(String),
    #[error("component count {k} out of range 1..={max}")]
    BadComponentCount { k: usize, max: usize },
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("perplexity {perplexity} infeasible for {n} points (must be < {limit})")]
    PerplexityTooLarge { perplexity: f64, n: usize, limit: f64 },
    #[error("t-SNE needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment (files, permissions) rather than
    /// of the data or configuration.
    pub fn is_environmental(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
