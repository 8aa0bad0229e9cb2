//! Error type shared across the crate.

use thiserror::Error;

use crate::series::HourStamp;

/// Everything that can go wrong between raw CSV and a recommendation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,
    #[error("series is degenerate (zero variance): {0}")]
    DegenerateSeries(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("series spans less than {required}: covers {actual}")]
    InsufficientSpan { required: String, actual: String },
    #[error("fewer than {required} complete days available ({actual})")]
    InsufficientDays { required: usize, actual: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate hour stamp {0} in input")]
    DuplicateStamp(HourStamp),
    #[error("timestamp {0} has non-zero sub-hour precision")]
    NonHourStamp(String),
    #[error("weather gap of {gap_hours} hours for station {station} starting {start} exceeds the {max_hours}-hour interpolation limit")]
    GapTooLarge {
        station: String,
        start: HourStamp,
        gap_hours: usize,
        max_hours: usize,
    },
    #[error("station {0} is not in the configured station list")]
    UnknownStation(String),
    #[error("configured station {0} has no rows in the weather file")]
    MissingStation(String),
    #[error("unknown event category {0}")]
    UnknownCategory(String),
    #[error("event span end {end} is not after start {start}")]
    InvertedSpan { start: String, end: String },
    #[error("weather for station {station} does not cover the observation grid ({detail})")]
    CoverageGap { station: String, detail: String },
    #[error("observation grid has a gap: missing hour {0}")]
    ObservationGap(HourStamp),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("lag {lag} out of range for series of length {len}")]
    LagOutOfRange { lag: usize, len: usize },

    #[error("unknown covariate column {0}")]
    UnknownColumn(String),
    #[error("no rows remain after restriction")]
    EmptyAfterRestriction,
    #[error("fixed-effects matrix is rank deficient")]
    RankDeficientFixed,
    #[error("symmetric factorization failed: {0}")]
    SingularFactorization(String),
    #[error("model fit did not converge")]
    NotConverged,
    #[error("row group {label} of factor {factor} was not present at fit time")]
    GroupUnseen { factor: String, label: String },
    #[error("design with {n} rows is too large for the dense oracle (max {max})")]
    TooLargeForOracle { n: usize, max: usize },

    #[error("calendar keys missing for decomposition")]
    MissingKeys,
    #[error("no cells satisfy the minimum count {0}")]
    NoEligibleCells(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
