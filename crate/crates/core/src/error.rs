use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("could not decode audio: {0}")]
    Decode(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("audio contains non-finite samples")]
    NonFiniteAudio,
    #[error("corpus at {0} contains no WAV files")]
    EmptyCorpus(PathBuf),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("class `{class}` has {groups} group(s); a stratified split needs at least 2")]
    UnsatisfiableStratification { class: String, groups: usize },
    #[error("class `{class}` has {groups} group(s); {k}-fold splitting needs at least {k}")]
    UnsatisfiableFolds { class: String, groups: usize, k: usize },
    #[error("group `{group}` carries more than one label")]
    InconsistentGroup { group: String },
    #[error("clip has {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("no frame rises above the silence threshold")]
    AllSilent,
    #[error("clip has zero signal power")]
    ZeroSignalPower,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("mel filter {index} has no FFT bins; too many filters for the FFT resolution")]
    DegenerateFilter { index: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("boosting failed at round {round}: weighted error {error:.4} is not below 0.5")]
    BoostFailed { round: usize, error: f64 },
    #[error("malformed feature table: {0}")]
    FeatureTable(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model bundle format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class, used to pick a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Data,
    Training,
    Version,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable snake_case identifier for machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io_error",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Decode(_) => "decode_error",
            Error::EmptyAudio => "empty_audio",
            Error::NonFiniteAudio => "non_finite_audio",
            Error::EmptyCorpus(_) => "empty_corpus",
            Error::Manifest(_) => "manifest_error",
            Error::UnsatisfiableStratification { .. } => "unsatisfiable_stratification",
            Error::UnsatisfiableFolds { .. } => "unsatisfiable_folds",
            Error::InconsistentGroup { .. } => "inconsistent_group",
            Error::TooShort { .. } => "too_short",
            Error::AllSilent => "all_silent",
            Error::ZeroSignalPower => "zero_signal_power",
            Error::Parameter(_) => "invalid_parameter",
            Error::DegenerateFilter { .. } => "degenerate_filter",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::Shape { .. } => "shape_mismatch",
            Error::BoostFailed { .. } => "boost_failed",
            Error::FeatureTable(_) => "feature_table_error",
            Error::Config(_) => "config_error",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Json(_) => "json_error",
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::DegenerateFilter { .. } => Category::Usage,
            Error::BoostFailed { .. } | Error::InvalidDataset(_) => Category::Training,
            Error::VersionMismatch { .. } => Category::Version,
            _ => Category::Data,
        }
    }
}
