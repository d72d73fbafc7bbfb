use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions differ: {0}")]
    DimensionMismatch(String),
    #[error("belief is not monotone: voxel {index} went from observed back to unknown")]
    NonMonotone { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scene generation failed: {0}")]
    SceneGeneration(String),
    #[error("viewpoint is inside solid geometry")]
    ViewpointInSolid,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no feasible viewpoint found within {attempts} attempts")]
    NoFeasibleSamples { attempts: usize },
    #[error("infeasible viewpoint")]
    InfeasibleViewpoint,
    #[error("path planning failed: {0}")]
    Planning(String),
    #[error("rollout labels need access to the ground-truth scene")]
    OracleUnavailable,
    #[error("sequence of length {len} exceeds the maximum {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
