//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),

    #[error("feature {index}: {reason}")]
    Feature { index: usize, reason: String },

    #[error("feature {index}: invalid geometry: {reason}")]
    InvalidGeometry { index: usize, reason: String },

    #[error("duplicate region id '{id}' (features {first} and {second})")]
    DuplicateRegionId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("region collection is empty")]
    EmptyRegionSet,

    #[error("observations row {row}: {reason}")]
    ObservationRow { row: usize, reason: String },

    #[error("missing column '{0}' in observations header")]
    MissingColumn(String),

    #[error("observations file has no data rows")]
    EmptyObservations,

    #[error("unknown region ids in observations: {}", .0.join(", "))]
    UnknownRegionIds(Vec<String>),

    #[error("unknown region id '{0}'")]
    UnknownRegion(String),

    #[error("region '{region}' has no attribute '{key}'")]
    MissingAttribute { region: String, key: String },

    #[error("need at least {k} distinct values for {k} classes, found {found}")]
    TooFewDistinct { k: usize, found: usize },

    #[error(
        "quantile binning produced a zero-length interval for class {class}; \
         the data has too many ties for K={k}, use a smaller K"
    )]
    DegenerateCuts { class: usize, k: usize },

    #[error("empty subset: {0}")]
    EmptySubset(&'static str),

    #[error("group '{0}' is empty")]
    EmptyGroup(String),

    #[error("expected exactly two groups, found {0}")]
    NotBinary(usize),

    #[error("ball radius {m} exceeds graph horizon {horizon}")]
    HorizonExceeded { m: usize, horizon: usize },

    #[error("unknown field '{0}'")]
    UnknownField(String),

    #[error("field '{0}' has no values")]
    AllMissing(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}
