use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transaction {hash} has no processed timestamp")]
    MissingProcessedTimestamp { hash: String },

    #[error("transaction {hash} was processed before it was pending")]
    NegativeDuration { hash: String },

    #[error("block {0} is not part of the chain")]
    UnknownBlock(u64),

    #[error("no blocks with transactions in the requested window")]
    EmptyWindow,

    #[error("window holds {found} prices, at least 5 are needed for quintiles")]
    InsufficientWindow { found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("empty input")]
    EmptyInput,

    #[error("value {0} is outside the transform domain")]
    DomainError(f64),

    #[error("all feature values are identical, the slope is undefined")]
    DegenerateDesign,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("dataset spans {span} days but a window needs {window}")]
    SpanTooShort { span: i64, window: i64 },

    #[error("no records to aggregate")]
    NoRecords,

    #[error("no prediction from source {source_id} for transaction {tx_hash}")]
    MissingSourcePrediction { source_id: String, tx_hash: String },

    #[error("paired inputs differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("every observation is tied, rank statistics are undefined")]
    DegenerateTies,

    #[error("every paired difference is zero")]
    AllZeroDifferences,

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("pair ({0}, {1}) appears more than once")]
    DuplicatePair(String, String),

    #[error("alpha * spectral radius = {0} leaves the centrality system near singular")]
    NearSingular(f64),

    #[error("rank order changes across alpha values: {0}")]
    UnstableRanking(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
