use thiserror::Error;

/// Errors produced by the linkage and analytics library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid calendar date {year:04}-{month:02}-{day:02}")]
    InvalidDate { year: i32, month: u32, day: u32 },

    #[error("publication date has no month (year {0} only)")]
    MissingMonth(i32),

    #[error("DOI is empty after normalization: {0:?}")]
    EmptyDoi(String),

    #[error("title normalizes to an empty match key: {0:?}")]
    EmptyTitleKey(String),

    #[error("first author has no extractable family name")]
    EmptyFamilyKey,

    #[error("author list is empty")]
    NoAuthors,

    #[error("no deposit in repository {0:?}")]
    NoDepositInRepository(String),

    #[error("dispersion requires at least two values, got {0}")]
    TooFewValues(usize),

    #[error("unknown subject label {0:?}")]
    UnknownSubject(String),

    #[error("XML parse error at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    #[error("OAI-PMH protocol error {code}: {message}")]
    OaiProtocol { code: String, message: String },

    #[error("extraction marker {marker:?} not found in {platform} page")]
    MarkerNotFound { platform: String, marker: String },

    #[error("cannot parse date from {0:?}")]
    UnparseableDate(String),

    #[error("network failure: {0}")]
    Network(String),

    #[error("harvest aborted after {attempts} attempts: {message}")]
    HarvestAborted { attempts: u32, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no ground-truth links to evaluate against")]
    EmptyGroundTruth,

    #[error("accuracy undefined: no pairs with a DOI on both sides")]
    AccuracyUndefined,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
