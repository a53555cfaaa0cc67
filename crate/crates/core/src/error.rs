use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node index {index} out of range for a graph with {n_nodes} nodes")]
    NodeOutOfRange { index: usize, n_nodes: usize },

    #[error("invalid weight {weight} on edge ({i}, {j}); weights must be finite and nonnegative")]
    InvalidWeight { i: usize, j: usize, weight: f64 },

    #[error("conflicting weights for edge ({i}, {j}): {first} and {second}")]
    ConflictingEdge {
        i: usize,
        j: usize,
        first: f64,
        second: f64,
    },

    #[error("graph has zero total edge weight")]
    EmptyGraph,

    #[error("node {0} has zero strength; isolated nodes cannot be clustered")]
    IsolatedNode(usize),

    #[error("requested {requested} eigenpairs from an operator of dimension {dim}")]
    TooManyEigenpairs { requested: usize, dim: usize },

    #[error("eigensolver did not converge: worst residual {worst_residual:e} exceeds tolerance {tol:e}")]
    NoConvergence {
        tol: f64,
        worst_residual: f64,
        eigenvalues: Vec<f64>,
        residuals: Vec<f64>,
    },

    #[error("eigenbasis has {basis} pairs but the configuration asks for {config}")]
    BasisMismatch { basis: usize, config: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("row {0} of the partition function is not a standard basis vector")]
    NotIndicator(usize),

    #[error("known label {label} for node {node} must be below n_hat = {n_hat}")]
    KnownLabelOutOfRange {
        node: usize,
        label: usize,
        n_hat: usize,
    },

    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed eigenbasis cache file {}: {msg}", path.display())]
    Cache { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
