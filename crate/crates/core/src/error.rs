use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid interaction: {0}")]
    InvalidInteraction(String),
    #[error("timestamp {timestamp} falls outside the time grid")]
    TimestampOutOfGrid { timestamp: i64 },
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    RatioError([f64; 3]),
    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    FeatureDimMismatch { expected: usize, found: usize },
    #[error("feature matrix has {found} items but the dataset has {expected}")]
    FeatureCountMismatch { expected: usize, found: usize },
    #[error("feature source has no vector for item {0:?}")]
    MissingItem(String),
    #[error("non-finite feature entry at row {row}, item {item}")]
    NonFiniteEntry { row: usize, item: usize },
    #[error("model variant {variant} cannot score this request: {reason}")]
    VariantMismatch {
        variant: &'static str,
        reason: &'static str,
    },
    #[error("no negative items available for user {user}, interval {interval}")]
    NoNegativesAvailable { user: usize, interval: usize },
    #[error("objective became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("metric requires a non-empty relevant set")]
    EmptyRelevant,
    #[error("reports do not share cutoffs: {0}")]
    CutoffMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, limit })
    }
}
