use thiserror::Error;

use crate::grid::Cell;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),

    #[error("sampled mask is empty")]
    EmptyMask,

    #[error("sampled mask is disconnected; two largest components have {largest} and {second} cells")]
    DisconnectedMask { largest: usize, second: usize },

    #[error("cell ({},{}) is outside the mask", cell.i, cell.j)]
    CellOutsideMask { cell: Cell },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("chain rejected at level {level}: condition ({condition}) {detail}")]
    ChainRejected {
        level: usize,
        condition: char,
        detail: String,
    },

    #[error("curve does not approach the boundary (interior cluster point)")]
    InteriorClusterPoint,

    #[error("no boundary data: problem has no resolved node with a datum")]
    NoBoundaryData,

    #[error("obstacle problem infeasible at cell ({},{})", cell.i, cell.j)]
    InfeasibleObstacle { cell: Cell },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate found before giving up.
        best: Box<Vec<f64>>,
    },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code family used by the command-line front end:
    /// 2 config/spec, 3 solver non-convergence, 4 trend assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 3,
            _ => 2,
        }
    }
}
