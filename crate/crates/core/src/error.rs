use thiserror::Error;

/// Errors produced by sptree.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a spanning tree: {0}")]
    NotATree(String),

    #[error("edge index {index} out of range for a tree with {edges} edges")]
    EdgeIndex { index: usize, edges: usize },

    #[error("edge ({0}, {1}) does not cross the cut and would disconnect the tree")]
    EdgeDoesNotCross(usize, usize),

    #[error("cut projection has more than two value clusters (max deviation {0:e}); Gram inverse is stale")]
    CorruptedProjection(f64),

    #[error("Gram inverse pivot {0:e} is not positive; Gram inverse is stale")]
    NonPositivePivot(f64),

    #[error("support graph of finite weights is disconnected (node {0} unreachable)")]
    DisconnectedSupport(usize),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("column {0} is constant and cannot be standardized")]
    ConstantColumn(String),

    #[error("columns {0} and {1} are identical; minimum pairwise distance is zero")]
    DuplicateColumns(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
