//! Reference models the acceptance suite checks the library against. They
//! are written from the definitions, without calling into the code under
//! test.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;

use causalstruct::graph::{
    CausalEdge, CausalSceneGraph, Dims, EdgeStatus, ObjectId, SceneMeta, SceneObject, SpatialRelation,
};
use causalstruct::layout::{LayoutScene, RenderedView};
use causalstruct::oracle::{
    AxisScores, GroundTruth, InterventionJudgment, Oracle, PrecedenceEstimate, Transport, TransportError,
};
use causalstruct::{Error, Result};

const FLOOR: f64 = 1e-3;

/// Posterior that edge `i` is correct, by listing both hypotheses and
/// normalizing. Under "correct" every edge keeps its trial fraction; under
/// "incorrect" edge `i` takes the complement.
pub fn brute_force_posterior(prior: f64, fractions: &[f64], i: usize) -> f64 {
    let mut joint = [0.0; 2];
    for (h, slot) in joint.iter_mut().enumerate() {
        let correct = h == 0;
        let mut lik = 1.0;
        for (j, f) in fractions.iter().enumerate() {
            let p = if j == i && !correct { 1.0 - f } else { *f };
            lik *= if p < FLOOR { FLOOR } else { p };
        }
        *slot = lik * if correct { prior } else { 1.0 - prior };
    }
    joint[0] / (joint[0] + joint[1])
}

/// Closed-form scale judge: percent deviation from the true value, clamped.
pub fn scale_plant(v: f64, v_true: f64) -> f64 {
    (100.0 * (v - v_true) / v_true).clamp(-100.0, 100.0)
}

/// Closed-form position judge: displacement as a percentage of `reference`.
pub fn position_plant(x: f64, x_true: f64, reference: f64) -> f64 {
    (100.0 * (x - x_true) / reference).clamp(-100.0, 100.0)
}

/// Intersection volume of two boxes given by corners.
pub fn box_overlap(a: ([f64; 3], [f64; 3]), b: ([f64; 3], [f64; 3])) -> f64 {
    let mut v = 1.0;
    for i in 0..3 {
        let lo = a.0[i].max(b.0[i]);
        let hi = a.1[i].min(b.1[i]);
        if hi <= lo {
            return 0.0;
        }
        v *= hi - lo;
    }
    v
}

/// Answers trial queries from a fixed table keyed by `(subject, target)`.
/// Every other query is refused.
pub struct FractionOracle {
    pub fractions: Vec<((ObjectId, ObjectId), f64)>,
}

fn refused<T>() -> Result<T> {
    Err(Error::Precondition("not answered by this oracle".into()))
}

impl Oracle for FractionOracle {
    fn propose_graph(&self, _: &str) -> Result<CausalSceneGraph> {
        refused()
    }

    fn precedence(&self, _: &SceneObject, _: &SceneObject) -> Result<PrecedenceEstimate> {
        refused()
    }

    fn edge_prior(&self, _: &CausalEdge) -> Result<f64> {
        refused()
    }

    fn edge_trials(&self, edge: &CausalEdge, _: usize) -> Result<f64> {
        self.fractions
            .iter()
            .find(|((s, t), _)| s == &edge.subject && t == &edge.target)
            .map(|(_, f)| *f)
            .ok_or_else(|| Error::Precondition(format!("no fraction for {edge}")))
    }

    fn intervention_judgment(&self, _: &CausalEdge, _: &RenderedView, _: usize) -> Result<InterventionJudgment> {
        refused()
    }

    fn scale_score(&self, _: &CausalEdge, _: &RenderedView, _: &LayoutScene) -> Result<i32> {
        refused()
    }

    fn position_scores(&self, _: &CausalEdge, _: &RenderedView, _: &LayoutScene) -> Result<AxisScores> {
        refused()
    }

    fn complete_edge(&self, _: &CausalSceneGraph, _: &ObjectId) -> Result<Option<CausalEdge>> {
        refused()
    }
}

/// Serves canned response bodies in order and records the requests.
#[derive(Default)]
pub struct QueueTransport {
    bodies: Mutex<VecDeque<String>>,
    pub requests: Mutex<Vec<String>>,
}

impl QueueTransport {
    pub fn new(bodies: impl IntoIterator<Item = String>) -> Self {
        QueueTransport {
            bodies: Mutex::new(bodies.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }
}

impl Transport for QueueTransport {
    fn post(&self, _: &str, _: Option<&str>, body: &str, _: Duration) -> std::result::Result<String, TransportError> {
        self.requests.lock().unwrap().push(body.to_string());
        self.bodies
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| TransportError::Fatal("queue exhausted".into()))
    }
}

pub fn random_dims(rng: &mut impl Rng) -> Dims {
    Dims::new(
        rng.random_range(5.0..150.0),
        rng.random_range(5.0..150.0),
        rng.random_range(5.0..150.0),
    )
}

pub fn random_relation(rng: &mut impl Rng) -> SpatialRelation {
    SpatialRelation::ALL[rng.random_range(0..SpatialRelation::ALL.len())]
}

/// A random forest of `n` objects `o0..`. Each later object depends on an
/// earlier one with probability `p_edge`. Returns the nodes and the true
/// `(subject, relation, target)` triples.
pub fn random_forest(
    rng: &mut impl Rng,
    n: usize,
    p_edge: f64,
) -> (Vec<SceneObject>, Vec<(ObjectId, SpatialRelation, ObjectId)>) {
    let mut nodes = Vec::new();
    let mut rels = Vec::new();
    for i in 0..n {
        let id = format!("o{i}");
        nodes.push(SceneObject::new(id.as_str(), id.as_str(), random_dims(rng)).expect("positive dims"));
        if i > 0 && rng.random_bool(p_edge) {
            let t = rng.random_range(0..i);
            rels.push((ObjectId::new(id), random_relation(rng), ObjectId::new(format!("o{t}"))));
        }
    }
    (nodes, rels)
}

/// Graph over `nodes` with one edge per triple, all at `status`.
pub fn graph_of(
    nodes: Vec<SceneObject>,
    triples: &[(ObjectId, SpatialRelation, ObjectId)],
    status: EdgeStatus,
) -> Result<CausalSceneGraph> {
    let edges = triples
        .iter()
        .map(|(s, r, t)| CausalEdge {
            status,
            ..CausalEdge::new(s.clone(), *r, t.clone())
        })
        .collect();
    CausalSceneGraph::new(nodes, edges, SceneMeta::default())
}

/// Truth table holding exactly `triples`, with unit scales and 1 m
/// reference extents for `ids`.
pub fn truth_of<'a>(
    triples: &[(ObjectId, SpatialRelation, ObjectId)],
    ids: impl IntoIterator<Item = &'a ObjectId>,
) -> GroundTruth {
    let mut t = GroundTruth::default();
    for (s, r, o) in triples {
        t.true_relations.insert((s.clone(), o.clone()), *r);
    }
    t.with_defaults_for(ids)
}

/// `(inner, outer)` pairs where `inner` is inside `outer`: following anchors
/// from `inner` through relations that carry the subject along, `outer` is
/// the target of an `in` step.
pub fn inside_pairs(anchor: &BTreeMap<ObjectId, (SpatialRelation, ObjectId)>) -> Vec<(ObjectId, ObjectId)> {
    use SpatialRelation::*;
    let carried = |r: SpatialRelation| matches!(r, On | LeftOn | RightOn | Corner | In | Above);
    let mut out = Vec::new();
    for start in anchor.keys() {
        let mut cur = start;
        for _ in 0..anchor.len() {
            let Some((r, t)) = anchor.get(cur) else { break };
            if !carried(*r) {
                break;
            }
            if *r == In {
                out.push((start.clone(), t.clone()));
            }
            cur = t;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_by_hand() {
        // one edge, fraction 0.8, prior 0.5: 0.8 / (0.8 + 0.2)
        assert!((brute_force_posterior(0.5, &[0.8], 0) - 0.8).abs() < 1e-15);
        // floor on both sides: equal likelihoods leave the prior
        assert!((brute_force_posterior(0.3, &[0.0, 0.5], 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn plants_clamp() {
        assert_eq!(scale_plant(1.5, 1.0), 50.0);
        assert_eq!(scale_plant(3.0, 1.0), 100.0);
        assert_eq!(position_plant(0.0, 0.3, 1.0), -30.0);
    }

    #[test]
    fn overlap_volume() {
        let a = ([0.0; 3], [1.0; 3]);
        assert_eq!(box_overlap(a, ([0.5; 3], [2.0; 3])), 0.125);
        assert_eq!(box_overlap(a, ([1.0, 0.0, 0.0], [2.0; 3])), 0.0);
    }

    #[test]
    fn inside_through_riders() {
        use SpatialRelation::*;
        let a: BTreeMap<ObjectId, (SpatialRelation, ObjectId)> = [
            ("ball".into(), (In, "box".into())),
            ("marble".into(), (On, "ball".into())),
            ("box".into(), (On, "table".into())),
        ]
        .into_iter()
        .collect();
        let mut pairs = inside_pairs(&a);
        pairs.sort();
        assert_eq!(
            pairs,
            vec![
                ("ball".into(), "box".into()),
                ("marble".into(), "box".into()),
            ]
        );
    }
}
