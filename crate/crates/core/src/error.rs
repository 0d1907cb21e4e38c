use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the stage that raises them; the CLI maps the
/// groups onto its exit codes via [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    // dataset loading and validation
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("trial {trial_id}: label {freq_hz} Hz is not in the stimulus set")]
    LabelNotInStimulusSet { trial_id: String, freq_hz: f64 },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    // pre-processing
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("band edges {low_hz}-{high_hz} Hz are invalid for Nyquist {nyquist_hz} Hz")]
    BandEdgesAboveNyquist {
        low_hz: f64,
        high_hz: f64,
        nyquist_hz: f64,
    },

    // synthesis and filter design
    #[error("{what} at {freq_hz} Hz violates Nyquist ({nyquist_hz} Hz)")]
    NyquistViolation {
        what: String,
        freq_hz: f64,
        nyquist_hz: f64,
    },
    #[error("{0} Hz is outside the response profile range")]
    OutOfProfileRange(f64),
    #[error("invalid response profile: {0}")]
    InvalidProfile(String),
    #[error("non-positive parameter: {0}")]
    NonPositiveParameter(String),

    // spectral analysis
    #[error("signal of {samples} samples is shorter than one {segment}-sample segment")]
    SignalTooShort { samples: usize, segment: usize },
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("filter support up to {upper_hz} Hz exceeds spectrum range {max_hz} Hz")]
    BankExceedsSpectrumRange { upper_hz: f64, max_hz: f64 },

    // classification
    #[error("class {0} has no training examples")]
    MissingClass(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    // baselines
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    // evaluation
    #[error("accuracy {0} is outside [0, 1]")]
    InvalidAccuracy(f64),
    #[error("ITR needs at least two commands, got {0}")]
    KTooSmall(usize),
    #[error("no trial produced a decision (accuracy {accuracy})")]
    NoDecisions { accuracy: f64 },
    #[error("all paired differences are identical; t statistic undefined")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("runs were made on different datasets: {0}")]
    DatasetMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification of an [`enum@Error`], used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Data,
    Evaluation,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io(_) | MissingFile(_) => ErrorKind::Io,
            MalformedManifest(_)
            | LabelNotInStimulusSet { .. }
            | ChannelMismatch(_)
            | InvalidRecording(_)
            | Csv(_)
            | SignalTooShort { .. } => ErrorKind::Data,
            UnknownChannel(_)
            | BandEdgesAboveNyquist { .. }
            | NyquistViolation { .. }
            | OutOfProfileRange(_)
            | InvalidProfile(_)
            | NonPositiveParameter(_)
            | InvalidSegmentation(_)
            | BankExceedsSpectrumRange { .. }
            | InvalidTrainConfig(_)
            | InvalidGrid(_)
            | InvalidConfig(_)
            | DatasetMismatch(_)
            | Json(_) => ErrorKind::Config,
            MissingClass(_)
            | DimensionMismatch { .. }
            | DegenerateCovariance(_)
            | InvalidAccuracy(_)
            | KTooSmall(_)
            | NoDecisions { .. }
            | ZeroVariance
            | LengthMismatch(..) => ErrorKind::Evaluation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
