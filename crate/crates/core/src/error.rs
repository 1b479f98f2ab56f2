use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The sample covariance over a local window could not be inverted.
    #[error(
        "local window of block {block:?} is singular ({window} vertices, {n_samples} samples)"
    )]
    LocalSingular {
        block: Vec<usize>,
        window: usize,
        n_samples: usize,
    },

    /// Hall's condition fails: `sites` (original indices) can only reach
    /// `neighbors` lattice vertices, and `neighbors.len() < sites.len()`.
    #[error("no site-perfect matching: {} sites reach only {} lattice vertices", sites.len(), neighbors.len())]
    NoMatching {
        sites: Vec<usize>,
        neighbors: Vec<usize>,
    },

    #[error("capacity exceeded: {requested} > {cap}")]
    CapacityExceeded { requested: usize, cap: usize },

    #[error("scale {scale}: {source}")]
    AtScale {
        scale: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_scale(scale: usize, err: Error) -> Self {
        Error::AtScale {
            scale,
            source: Box::new(err),
        }
    }

    /// Strips any `AtScale` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtScale { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
