use super::{clamp_score, AxisScores, GroundTruth, InterventionJudgment, Oracle, PrecedenceEstimate};
use crate::error::{Error, Result};
use crate::graph::{CausalEdge, CausalSceneGraph, ObjectId, SceneObject};
use crate::layout::{LayoutScene, RenderedView};

const CONFIDENT: f64 = 0.9;
const DOUBTFUL: f64 = 0.1;
const UNDECIDED: f64 = 0.5;

const PRIOR_MATCH: f64 = 0.9;
const PRIOR_OTHER_RELATION: f64 = 0.5;
const PRIOR_ABSENT: f64 = 0.2;

/// Rule-based oracle that answers from a [`GroundTruth`] table. Every answer
/// is a pure function of the query and the table.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicOracle {
    truth: GroundTruth,
    gap: f64,
}

impl DeterministicOracle {
    pub fn new(truth: GroundTruth) -> Self {
        DeterministicOracle { truth, gap: 0.05 }
    }

    /// Clearance used when deriving a desired position from a relation.
    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap = gap;
        self
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    fn matches(&self, edge: &CausalEdge) -> bool {
        self.truth.relation(&edge.subject, &edge.target) == Some(edge.relation)
    }

    fn extent(&self, id: &ObjectId) -> Result<[f64; 3]> {
        self.truth
            .reference_extent
            .get(id)
            .copied()
            .ok_or_else(|| Error::MissingTruth(id.to_string()))
    }
}

impl Oracle for DeterministicOracle {
    fn propose_graph(&self, prompt: &str) -> Result<CausalSceneGraph> {
        crate::grammar::parse_prompt(prompt).map(|p| p.graph)
    }

    fn precedence(&self, a: &SceneObject, b: &SceneObject) -> Result<PrecedenceEstimate> {
        if a.id == b.id {
            return Err(Error::Precondition(format!("precedence of `{}` with itself", a.id)));
        }
        let (c_ij, c_ji) = if self.truth.depends_on(&a.id, &b.id) {
            (CONFIDENT, DOUBTFUL)
        } else if self.truth.depends_on(&b.id, &a.id) {
            (DOUBTFUL, CONFIDENT)
        } else {
            (UNDECIDED, UNDECIDED)
        };
        Ok(PrecedenceEstimate { c_ij, c_ji })
    }

    fn edge_prior(&self, edge: &CausalEdge) -> Result<f64> {
        Ok(match self.truth.relation(&edge.subject, &edge.target) {
            Some(r) if r == edge.relation => PRIOR_MATCH,
            Some(_) => PRIOR_OTHER_RELATION,
            None => PRIOR_ABSENT,
        })
    }

    fn edge_trials(&self, edge: &CausalEdge, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Precondition("trial count must be at least 1".into()));
        }
        Ok(if self.matches(edge) { 1.0 } else { 0.0 })
    }

    fn intervention_judgment(
        &self,
        edge: &CausalEdge,
        _image: &RenderedView,
        _trial: usize,
    ) -> Result<InterventionJudgment> {
        Ok(match self.truth.relation(&edge.subject, &edge.target) {
            Some(r) if r != edge.relation => InterventionJudgment::Modify(r),
            _ => InterventionJudgment::Keep,
        })
    }

    fn scale_score(&self, edge: &CausalEdge, _image: &RenderedView, scene: &LayoutScene) -> Result<i32> {
        let s = scene.get(&edge.subject)?.scale;
        let st = *self
            .truth
            .true_scales
            .get(&edge.subject)
            .ok_or_else(|| Error::MissingTruth(edge.subject.to_string()))?;
        Ok(clamp_score(100.0 * (s - st) / st))
    }

    fn position_scores(
        &self,
        edge: &CausalEdge,
        _image: &RenderedView,
        scene: &LayoutScene,
    ) -> Result<AxisScores> {
        let p = scene.get(&edge.subject)?.center;
        let desired = match self.truth.true_positions.get(&edge.subject) {
            Some(d) => *d,
            None => {
                let rel = self
                    .truth
                    .relation(&edge.subject, &edge.target)
                    .unwrap_or(edge.relation);
                scene.desired_center(&edge.subject, rel, &edge.target, self.gap)?
            }
        };
        let l = self.extent(&edge.target)?;
        let s = |i: usize| clamp_score(100.0 * (p[i] - desired[i]) / l[i]);
        Ok(AxisScores::new(s(0), s(1), s(2)))
    }

    fn complete_edge(&self, graph: &CausalSceneGraph, isolated: &ObjectId) -> Result<Option<CausalEdge>> {
        let present = |id: &ObjectId| id != isolated && graph.nodes().contains_key(id);
        let outgoing = self
            .truth
            .true_relations
            .iter()
            .find(|((s, t), _)| s == isolated && present(t));
        if let Some(((s, t), r)) = outgoing {
            return Ok(Some(CausalEdge::new(s.clone(), *r, t.clone())));
        }
        let incoming = self
            .truth
            .true_relations
            .iter()
            .find(|((s, t), _)| t == isolated && present(s));
        Ok(incoming.map(|((s, t), r)| CausalEdge::new(s.clone(), *r, t.clone())))
    }
}
