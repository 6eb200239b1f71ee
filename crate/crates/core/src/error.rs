use std::path::PathBuf;

use thiserror::Error;

use crate::lattice::PathSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no representative multi-index exists: order {order} is smaller than set size {size}")]
    NoRepresentative { order: usize, size: usize },

    #[error("path set {0} appears twice in the domain")]
    DuplicateSet(PathSet),

    #[error("the empty path set is not part of the lattice")]
    EmptySet,

    #[error("path set {set} does not fit in {n} monitor paths")]
    OutOfUniverse { set: PathSet, n: usize },

    #[error("bounding topology must be an antichain: {inner} is contained in {outer}")]
    NotAntichain { inner: PathSet, outer: PathSet },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("k-statistic order {0} not supported (orders 1 to 4 are implemented)")]
    OrderNotSupported(usize),

    #[error("sample too small: need more than {needed} rows, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("full-order data mode supports at most 4 monitor paths, got {0}; use the sparse pipeline")]
    TooManyPaths(usize),

    #[error("monitor pair ({0}, {1}) is not connected")]
    Unreachable(String, String),

    #[error("missing estimate for observed path set {0}")]
    MissingEstimate(PathSet),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
