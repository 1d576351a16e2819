use std::path::PathBuf;

use crate::metrics::MetricKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("rate must be finite and positive, got {0}")]
    InvalidRate(f64),
    #[error("rate {0} exceeds the supported maximum of 1e5")]
    RateOutOfRange(f64),
    #[error("variance {variance} must exceed the mean {mu}; use a Poisson distribution instead")]
    DegenerateDispersion { mu: f64, variance: f64 },
    #[error("no pairs")]
    EmptyInput,
    #[error("total actual is zero; {0} is undefined")]
    ZeroActualTotal(MetricKind),
    #[error("prediction must be positive after clipping, got {0}")]
    NonPositivePrediction(f64),
    #[error("n_bins must be at least 1")]
    InvalidBinCount,
    #[error("reference values must be strictly increasing along the grade order: {0:?}")]
    NonMonotoneReferences(Vec<f64>),
    #[error("no bucket is ratable")]
    NoRatableBuckets,
    #[error("{0} has no reference expectation")]
    UnsupportedMetric(MetricKind),
    #[error("invalid grade ladder: {0}")]
    InvalidLadder(String),
    #[error("insufficient history: need {needed} days, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("schema mismatch in {}: missing or invalid columns {missing:?}", file.display())]
    SchemaMismatch { file: PathBuf, missing: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
