use thiserror::Error;

use crate::articulation::DetectionReport;
use crate::controller::{PullReport, PushReport};

/// Errors raised across the tracking, simulation and control pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported PLY property `{0}`")]
    UnsupportedProperty(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("covariance is not positive semidefinite (cholesky failed after jitter {jitter:e})")]
    CholeskyFailure { jitter: f64 },

    #[error("innovation covariance is singular (condition estimate {condition:e})")]
    SingularInnovation { condition: f64 },

    #[error("no segment within association gate (nearest centroid {nearest:.4} m)")]
    NoSegmentAssociated { nearest: f64 },

    #[error("joint {joint} value {value} outside limits [{lo}, {hi}]")]
    JointLimitViolation {
        joint: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("lever arm {lever:.4} m is below the 1 cm minimum")]
    LeverTooSmall { lever: f64 },

    #[error("motion leaves the workspace: {0}")]
    WorkspaceExceeded(String),

    #[error("no graspable edge: {0}")]
    NoGraspableEdge(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown scene `{0}`")]
    UnknownScene(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("part count mismatch: {left} vs {right}")]
    PartCountMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("action budget exhausted")]
    BudgetExhausted(Box<BestSoFar>),
}

/// Partial result carried by [`Error::BudgetExhausted`].
#[derive(Debug, Clone)]
pub enum BestSoFar {
    Detection(DetectionReport),
    Push(PushReport),
    Pull(PullReport),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
