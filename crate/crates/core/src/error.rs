use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage, attached to errors surfaced by [`crate::pipeline::run_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sdp,
    Embedding,
    CriticalSet,
    Hst,
    KMedian,
    Explanation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Sdp => "sdp",
            Stage::Embedding => "embedding",
            Stage::CriticalSet => "critical-set",
            Stage::Hst => "hst",
            Stage::KMedian => "kmedian",
            Stage::Explanation => "explanation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed edge `{content}`")]
    MalformedLine { line: usize, content: String },
    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: usize, vertex: u64 },
    #[error("edge list contains no edges")]
    EmptyGraph,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vertex {vertex} has degree zero")]
    DegreeZero { vertex: usize },
    #[error("eigensolver residual {residual:e} exceeds tolerance {tolerance:e}")]
    EigensolveFailure { residual: f64, tolerance: f64 },
    #[error("every noisy cell count fell below the release threshold")]
    EmptyCoreset,
    #[error("need at least {need} points, have {have}")]
    InsufficientPoints { have: usize, need: usize },
    #[error("found only {found} conflict-free subtree roots, need {need}")]
    InsufficientCandidates { found: usize, need: usize },
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
