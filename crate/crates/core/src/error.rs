//! Crate-wide error type.

use thiserror::Error;

/// Axis of a localized adjacency block, used to report which side of the
/// Laplacian normalization degenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Row => write!(f, "row"),
            Axis::Column => write!(f, "column"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A model specification failed validation (dimensions, probability ranges,
    /// simplex constraints, missing constants, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Community probabilities at some covariate do not form a distribution.
    #[error("community probabilities at node {node} sum to {sum} (must be 1 within 1e-12)")]
    NotASimplex { node: usize, sum: f64 },

    /// An edge-probability evaluation left [0, 1].
    #[error("edge probability B_{{{g},{h}}}(x, x') = {value} outside [0, 1]")]
    ProbabilityOutOfRange { g: usize, h: usize, value: f64 },

    /// Requested more neighbours than there are points.
    #[error("k = {k} exceeds the number of available points {available}")]
    KTooLarge { k: usize, available: usize },

    /// A subgroup radius was requested for a community with no members.
    #[error("community {community} has no members among the sampled nodes")]
    EmptyCommunity { community: usize },

    /// A degree-regularized Laplacian is undefined because some row or column
    /// of the localized block has zero regularized degree.
    #[error("isolated {axis} {index}: zero degree and tau = 0 make the Laplacian undefined")]
    IsolatedNode { axis: Axis, index: usize },

    /// The population factorization is undefined because a community is absent
    /// from one of the neighbourhoods.
    #[error("community {community} is empty in the {side} neighbourhood; factorization undefined")]
    EmptyNeighbourhoodGroup { community: usize, side: &'static str },

    /// Assortative alignment failed because some row of the estimated edge
    /// matrix has a tied maximum.
    #[error("row {row} of the estimated edge-probability matrix has a tied maximum; assortative alignment is ambiguous (use proportion ordering instead)")]
    AlignmentTie { row: usize },

    /// Exact permutation search is only offered for small numbers of groups.
    #[error("exact permutation search is limited to {limit} groups, got {groups}")]
    TooManyGroups { groups: usize, limit: usize },

    /// Generic dimension mismatch between two inputs.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An experiment plan failed validation.
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    /// Not enough grid points (or no usable ones) to fit a rate slope.
    #[error("rate slope needs at least 4 usable grid points, got {0}")]
    TooFewGridPoints(usize),

    /// A linear-algebra backend call failed.
    #[error("linear algebra backend error: {0}")]
    Linalg(String),

    /// Malformed persisted data (CSV / JSON files).
    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
