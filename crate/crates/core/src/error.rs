use thiserror::Error;

use crate::graph::ObjectId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("cycle detected: {}", .0.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(" -> "))]
    CycleDetected(Vec<ObjectId>),

    #[error("invalid object `{id}`: {reason}")]
    InvalidObject { id: String, reason: String },

    #[error("invalid edge {subject} -> {target}: {reason}")]
    InvalidEdge {
        subject: String,
        target: String,
        reason: String,
    },

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("grammar error: {0}")]
    Grammar(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("malformed oracle response: {0}")]
    MalformedResponse(String),

    #[error("ground truth has no entry for `{0}`")]
    MissingTruth(String),

    #[error("oracle offered no in-vocabulary edge for isolated object `{0}`")]
    CompletionFailed(ObjectId),

    #[error("edge #{0} has posterior at or below tau1 but no intervention result")]
    MissingIntervention(usize),

    #[error("render failed: {0}")]
    RenderFailed(String),

    #[error("`{subject}` does not fit {relation} `{target}`")]
    DoesNotFit {
        subject: ObjectId,
        relation: String,
        target: ObjectId,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OracleUnavailable(_)
            | Error::MalformedResponse(_)
            | Error::MissingTruth(_)
            | Error::CompletionFailed(_) => 2,
            Error::DoesNotFit { .. } | Error::RenderFailed(_) => 4,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
