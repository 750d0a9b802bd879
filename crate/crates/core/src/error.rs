use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad category of an [`Error`], used by the command-line front end to
/// pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or inconsistent input data (exit 2).
    Input,
    /// A numerical stage of the workflow could not proceed (exit 3).
    Pipeline,
    /// Filesystem or serialization failure (exit 4).
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file {path}: line {line}: {reason}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("empty file {0}")]
    EmptyFile(PathBuf),
    #[error("wavelength axis is not strictly monotonic at position {position}")]
    NonMonotonicAxis { position: usize },
    #[error("invalid wavelength axis: {0}")]
    InvalidAxis(String),
    #[error("invalid spectra matrix: {0}")]
    InvalidMatrix(String),
    #[error("unknown storage condition {0:?} (expected Iso4, Iso8, Iso12 or Dynamic)")]
    UnknownCondition(String),
    #[error("sample {sample_id}: negative storage time {value}")]
    NegativeTime { sample_id: String, value: f64 },
    #[error("invalid sample record {sample_id}: {reason}")]
    InvalidRecord { sample_id: String, reason: String },
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("sample id {0:?} has no matching record")]
    UnmatchedSampleId(String),
    #[error("count mismatch: {spectra} spectra vs {records} records")]
    CountMismatch { spectra: usize, records: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("axis unit mismatch: model uses {model}, spectra declared as {data}")]
    UnitMismatch { model: String, data: String },
    #[error("spectrum{} has zero robust scale (MAD {mad:e})", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    ZeroScale { row: Option<usize>, mad: f64 },
    #[error("insufficient samples: {got} available, {need} required")]
    InsufficientSamples { got: usize, need: usize },
    #[error("column mismatch: expected {expected} columns, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("no feature has positive importance")]
    EmptySelection,
    #[error("rank deficient: component {component} of {requested} could not be extracted")]
    RankDeficient { component: usize, requested: usize },
    #[error("invalid component count {k}: must be in 1..={max}")]
    BadK { k: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("too few points: {got} given, at least {need} required")]
    TooFewPoints { got: usize, need: usize },
    #[error("invalid fold count {folds} for {rows} rows")]
    BadFoldCount { folds: usize, rows: usize },
    #[error("invalid cross-validation spec: {0}")]
    BadCvSpec(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("measured values have zero variance")]
    ZeroVariance,
    #[error("confidence level {0} is not in (0, 1)")]
    BadLevel(f64),
    #[error("missing target: {0}")]
    MissingTarget(String),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("config: {0}")]
    Config(String),
    #[error("empty {0} partition")]
    EmptyPartition(&'static str),
    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage attribution wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::MalformedFile { .. }
            | Error::EmptyFile(_)
            | Error::NonMonotonicAxis { .. }
            | Error::InvalidAxis(_)
            | Error::InvalidMatrix(_)
            | Error::UnknownCondition(_)
            | Error::NegativeTime { .. }
            | Error::InvalidRecord { .. }
            | Error::DuplicateSampleId(_)
            | Error::UnmatchedSampleId(_)
            | Error::CountMismatch { .. }
            | Error::EmptyInput
            | Error::AxisMismatch(_)
            | Error::UnitMismatch { .. }
            | Error::ColumnMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::LengthMismatch { .. }
            | Error::MissingTarget(_)
            | Error::BadSpec(_)
            | Error::BadParameter(_)
            | Error::BadCvSpec(_)
            | Error::BadLevel(_)
            | Error::Config(_)
            | Error::EmptyPartition(_) => ErrorClass::Input,
            Error::Csv(e) if e.is_io_error() => ErrorClass::Io,
            Error::Csv(_) => ErrorClass::Input,
            Error::Io { .. } => ErrorClass::Io,
            Error::Json(e) if e.is_io() => ErrorClass::Io,
            Error::Json(_) => ErrorClass::Input,
            _ => ErrorClass::Pipeline,
        }
    }
}
