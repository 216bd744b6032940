use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or parameter block does not match the graph it is used with.
    #[error("shape error: {0}")]
    Shape(String),

    /// Inputs are individually valid but do not fit together (wrong
    /// treatment mode, covariates supplied to a model without kappa, ...).
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("capacity error: {nodes} nodes exceeds the enumeration limit of {limit}")]
    Capacity { nodes: usize, limit: usize },

    #[error("undefined effect scale: {0}")]
    UndefinedScale(String),

    #[error("degenerate node {node}: only one outcome value observed")]
    DegenerateNode { node: String },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("bootstrap failed: {dropped} of {requested} replicates dropped")]
    BootstrapFailure { dropped: usize, requested: usize },

    #[error("schema error: missing columns {}", .0.join(", "))]
    Schema(Vec<String>),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("unknown issue code {code}; valid codes are 1-14: {valid}")]
    UnknownIssue { code: i64, valid: String },

    #[error("unknown justice name {0:?}")]
    UnknownJustice(String),

    #[error("no nonadjacent pairs in the network")]
    NoPairs,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }
}
