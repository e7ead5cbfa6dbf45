//! The evaluator boundary. Every judgment the pipeline needs (edge
//! precedence, priors, trial votes, intervention verdicts and correction
//! scores) goes through [`Oracle`].

mod deterministic;
mod payload;
pub mod prompts;
mod remote;
mod truth;

use std::path::PathBuf;

use crate::error::Result;
use crate::graph::{CausalEdge, CausalSceneGraph, ObjectId, SceneObject, SpatialRelation};
use crate::layout::{LayoutScene, RenderedView};

pub use deterministic::DeterministicOracle;
pub use payload::{parse_answer_payload, Payload};
pub use remote::{
    decode_chat_body, CacheMode, RemoteConfig, RemoteOracle, Transport, TransportError, UreqTransport,
    API_KEY_ENV,
};
pub use truth::{decode_truth, GroundTruth};

/// Independent confidences that `a` comes after `b` (`c_ij`) and that `b`
/// comes after `a` (`c_ji`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecedenceEstimate {
    pub c_ij: f64,
    pub c_ji: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterventionJudgment {
    Keep,
    Modify(SpatialRelation),
}

impl InterventionJudgment {
    /// The relation this judgment votes for when shown `current`.
    pub fn vote(self, current: SpatialRelation) -> SpatialRelation {
        match self {
            InterventionJudgment::Keep => current,
            InterventionJudgment::Modify(r) => r,
        }
    }

    pub fn updated_relation(self) -> Option<SpatialRelation> {
        match self {
            InterventionJudgment::Keep => None,
            InterventionJudgment::Modify(r) => Some(r),
        }
    }
}

pub const SCORE_LIMIT: i32 = 100;

pub fn clamp_score(v: f64) -> i32 {
    // NaN maps to 0 through the saturating cast
    (v.round().clamp(-f64::from(SCORE_LIMIT), f64::from(SCORE_LIMIT))) as i32
}

/// Signed per-axis correction scores, each in [-100, 100].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AxisScores {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl AxisScores {
    pub fn new(x: i32, y: i32, z: i32) -> Self {
        let c = |v: i32| v.clamp(-SCORE_LIMIT, SCORE_LIMIT);
        AxisScores {
            x: c(x),
            y: c(y),
            z: c(z),
        }
    }

    pub fn axis(&self, i: usize) -> i32 {
        [self.x, self.y, self.z][i]
    }
}

pub trait Oracle: Send + Sync {
    /// Parses or asks for the initial objects and relations for `prompt`.
    fn propose_graph(&self, prompt: &str) -> Result<CausalSceneGraph>;

    fn precedence(&self, a: &SceneObject, b: &SceneObject) -> Result<PrecedenceEstimate>;

    fn edge_prior(&self, edge: &CausalEdge) -> Result<f64>;

    /// Fraction of `k` independent trials that affirm `edge`.
    fn edge_trials(&self, edge: &CausalEdge, k: usize) -> Result<f64>;

    /// One judgment trial on a rendered view of the scene.
    fn intervention_judgment(
        &self,
        edge: &CausalEdge,
        image: &RenderedView,
        trial: usize,
    ) -> Result<InterventionJudgment>;

    /// Positive when the subject is too large.
    fn scale_score(&self, edge: &CausalEdge, image: &RenderedView, scene: &LayoutScene) -> Result<i32>;

    /// Positive when the subject is displaced toward +axis.
    fn position_scores(
        &self,
        edge: &CausalEdge,
        image: &RenderedView,
        scene: &LayoutScene,
    ) -> Result<AxisScores>;

    /// One edge attaching `isolated` to some other node, if the oracle has one.
    fn complete_edge(&self, graph: &CausalSceneGraph, isolated: &ObjectId) -> Result<Option<CausalEdge>>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// Answers from a ground-truth table. Without an explicit table the
    /// pipeline derives one from the prompt.
    Deterministic { truth: Option<GroundTruth> },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub trials_k: usize,
    pub backend: Backend,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            trials_k: 5,
            backend: Backend::Deterministic { truth: None },
            cache_dir: None,
            seed: 0,
        }
    }
}
