//! Objects, relation edges and the causal scene graph.
//!
//! An edge `[subject, relation, target]` states that the subject's placement
//! depends on the target. Topological order therefore puts every target
//! before its subjects, so anchors are placed before their dependents.

mod relation;
pub mod scene_file;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use relation::{parse_relation, SpatialRelation};
pub use scene_file::{decode_scene, encode_scene, roundtrip_scene, SCENE_VERSION};

/// Caller-supplied object identifier, conventionally `slug-ordinal` (`cup-1`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_string())
    }
}

/// Real-world object dimensions in centimeters.
///
/// Length runs along x, width along y and height along z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims {
    pub length_cm: f64,
    pub width_cm: f64,
    pub height_cm: f64,
}

impl Dims {
    pub fn new(length_cm: f64, width_cm: f64, height_cm: f64) -> Self {
        Dims {
            length_cm,
            width_cm,
            height_cm,
        }
    }

    pub fn volume_cm3(&self) -> f64 {
        self.length_cm * self.width_cm * self.height_cm
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.length_cm, self.width_cm, self.height_cm]
    }

    /// Extents in meters at the given scale.
    pub fn extents_m(&self, scale: f64) -> [f64; 3] {
        self.as_array().map(|d| d * CM_TO_M * scale)
    }

    fn is_valid(&self) -> bool {
        self.as_array().iter().all(|d| d.is_finite() && *d > 0.0)
    }
}

/// Centimeter to meter conversion applied at layout time.
pub const CM_TO_M: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: ObjectId,
    pub name: String,
    pub dims: Dims,
    /// World position of the center, meters.
    pub position: [f64; 3],
    pub scale: f64,
    /// Opaque reference to externally generated geometry.
    pub asset_ref: Option<String>,
}

impl SceneObject {
    pub fn new(id: impl Into<ObjectId>, name: impl Into<String>, dims: Dims) -> Result<Self> {
        let obj = SceneObject {
            id: id.into(),
            name: name.into(),
            dims,
            position: [0.0; 3],
            scale: 1.0,
            asset_ref: None,
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidObject {
                id: self.id.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.id.as_str().is_empty() {
            return fail("empty id");
        }
        if !self.dims.is_valid() {
            return fail("dimensions must be finite and strictly positive");
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return fail("scale must be finite and strictly positive");
        }
        if !self.position.iter().all(|p| p.is_finite()) {
            return fail("position must be finite");
        }
        Ok(())
    }

    pub fn volume_cm3(&self) -> f64 {
        self.dims.volume_cm3()
    }
}

impl From<String> for ObjectId {
    fn from(s: String) -> Self {
        ObjectId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeStatus {
    Proposed,
    Ordered,
    Kept,
    Modified,
    Removed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalEdge {
    pub subject: ObjectId,
    pub relation: SpatialRelation,
    pub target: ObjectId,
    pub prior: f64,
    pub posterior: Option<f64>,
    pub status: EdgeStatus,
}

impl CausalEdge {
    pub fn new(
        subject: impl Into<ObjectId>,
        relation: SpatialRelation,
        target: impl Into<ObjectId>,
    ) -> Self {
        CausalEdge {
            subject: subject.into(),
            relation,
            target: target.into(),
            prior: 0.5,
            posterior: None,
            status: EdgeStatus::Proposed,
        }
    }

    pub fn with_prior(mut self, prior: f64) -> Self {
        self.prior = prior;
        self
    }

    pub fn is_active(&self) -> bool {
        self.status != EdgeStatus::Removed
    }

    /// Best available confidence: the posterior once computed, else the prior.
    pub fn confidence(&self) -> f64 {
        self.posterior.unwrap_or(self.prior)
    }

    pub fn pair(&self) -> (&ObjectId, &ObjectId) {
        (&self.subject, &self.target)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidEdge {
                subject: self.subject.to_string(),
                target: self.target.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.subject == self.target {
            return fail("self-loop");
        }
        if !is_probability(self.prior) {
            return fail("prior outside [0, 1]");
        }
        if let Some(p) = self.posterior {
            if !is_probability(p) {
                return fail("posterior outside [0, 1]");
            }
        }
        Ok(())
    }
}

impl fmt::Display for CausalEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.subject, self.relation, self.target)
    }
}

pub(crate) fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneMeta {
    pub prompt: String,
}

/// Validated scene graph. Construction checks every structural invariant;
/// operations produce new graph values.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalSceneGraph {
    nodes: BTreeMap<ObjectId, SceneObject>,
    edges: Vec<CausalEdge>,
    meta: SceneMeta,
}

impl CausalSceneGraph {
    pub fn new(
        nodes: impl IntoIterator<Item = SceneObject>,
        edges: Vec<CausalEdge>,
        meta: SceneMeta,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for node in nodes {
            node.validate()?;
            let id = node.id.clone();
            if map.insert(id.clone(), node).is_some() {
                return Err(Error::InvalidObject {
                    id: id.to_string(),
                    reason: "duplicate id".into(),
                });
            }
        }
        let graph = CausalSceneGraph {
            nodes: map,
            edges,
            meta,
        };
        graph.validate_edges()?;
        Ok(graph)
    }

    pub fn empty() -> Self {
        CausalSceneGraph {
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            meta: SceneMeta::default(),
        }
    }

    fn validate_edges(&self) -> Result<()> {
        let mut pairs = BTreeSet::new();
        for edge in &self.edges {
            edge.validate()?;
            for end in [&edge.subject, &edge.target] {
                if !self.nodes.contains_key(end) {
                    return Err(Error::UnknownObject(end.to_string()));
                }
            }
            if edge.is_active() && !pairs.insert(edge.pair()) {
                return Err(Error::InvalidEdge {
                    subject: edge.subject.to_string(),
                    target: edge.target.to_string(),
                    reason: "more than one active edge for this pair".into(),
                });
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeMap<ObjectId, SceneObject> {
        &self.nodes
    }

    pub fn node(&self, id: &ObjectId) -> Result<&SceneObject> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    pub fn edges(&self) -> &[CausalEdge] {
        &self.edges
    }

    pub fn active_edges(&self) -> impl Iterator<Item = &CausalEdge> {
        self.edges.iter().filter(|e| e.is_active())
    }

    pub fn meta(&self) -> &SceneMeta {
        &self.meta
    }

    pub fn into_parts(self) -> (BTreeMap<ObjectId, SceneObject>, Vec<CausalEdge>, SceneMeta) {
        (self.nodes, self.edges, self.meta)
    }

    /// Same nodes and meta with a replacement edge list.
    pub fn with_edges(&self, edges: Vec<CausalEdge>) -> Result<Self> {
        CausalSceneGraph::new(self.nodes.values().cloned(), edges, self.meta.clone())
    }

    /// Same edges and meta with replacement nodes.
    pub fn with_nodes(&self, nodes: impl IntoIterator<Item = SceneObject>) -> Result<Self> {
        CausalSceneGraph::new(nodes, self.edges.clone(), self.meta.clone())
    }

    /// Nodes touched by no active edge.
    pub fn isolated_nodes(&self) -> Vec<ObjectId> {
        let touched: BTreeSet<&ObjectId> = self
            .active_edges()
            .flat_map(|e| [&e.subject, &e.target])
            .collect();
        self.nodes
            .keys()
            .filter(|id| !touched.contains(id))
            .cloned()
            .collect()
    }

    /// One cycle among the active edges, as the ordered list of edge indices
    /// that close it, if any exists.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        let mut out: BTreeMap<&ObjectId, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.is_active() {
                out.entry(&e.subject).or_default().push(i);
            }
        }
        for list in out.values_mut() {
            list.sort_by(|a, b| self.edges[*a].target.cmp(&self.edges[*b].target));
        }

        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            OnStack,
            Done,
        }
        let mut marks: BTreeMap<&ObjectId, Mark> =
            self.nodes.keys().map(|k| (k, Mark::New)).collect();

        for start in self.nodes.keys() {
            if marks[start] != Mark::New {
                continue;
            }
            // iterative DFS; stack of (node, next edge position), path of edge indices
            let mut stack: Vec<(&ObjectId, usize)> = vec![(start, 0)];
            let mut path: Vec<usize> = Vec::new();
            marks.insert(start, Mark::OnStack);
            while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
                let succ = out.get(node).map(Vec::as_slice).unwrap_or(&[]);
                if *pos < succ.len() {
                    let edge_idx = succ[*pos];
                    *pos += 1;
                    let next = &self.edges[edge_idx].target;
                    match marks[next] {
                        Mark::New => {
                            marks.insert(next, Mark::OnStack);
                            stack.push((next, 0));
                            path.push(edge_idx);
                        }
                        Mark::OnStack => {
                            path.push(edge_idx);
                            let begin = path
                                .iter()
                                .position(|&i| &self.edges[i].subject == next)
                                .unwrap_or(0);
                            return Some(path[begin..].to_vec());
                        }
                        Mark::Done => {}
                    }
                } else {
                    marks.insert(node, Mark::Done);
                    stack.pop();
                    path.pop();
                }
            }
        }
        None
    }
}

/// Object ids ordered so every active edge's target precedes its subject.
/// Ties are broken by ascending id.
pub fn topological_order(graph: &CausalSceneGraph) -> Result<Vec<ObjectId>> {
    let mut indegree: BTreeMap<&ObjectId, usize> = graph.nodes.keys().map(|k| (k, 0)).collect();
    let mut dependents: BTreeMap<&ObjectId, Vec<&ObjectId>> = BTreeMap::new();
    for e in graph.active_edges() {
        *indegree.get_mut(&e.subject).expect("validated endpoint") += 1;
        dependents.entry(&e.target).or_default().push(&e.subject);
    }
    let mut ready: BTreeSet<&ObjectId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut order = Vec::with_capacity(graph.nodes.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.clone());
        for dep in dependents.get(next).into_iter().flatten() {
            let d = indegree.get_mut(dep).expect("validated endpoint");
            *d -= 1;
            if *d == 0 {
                ready.insert(dep);
            }
        }
    }
    if order.len() == graph.nodes.len() {
        return Ok(order);
    }
    let cycle = graph.find_cycle().unwrap_or_default();
    let mut ids: Vec<ObjectId> = cycle
        .iter()
        .map(|&i| graph.edges[i].subject.clone())
        .collect();
    if let Some(&first) = cycle.first() {
        ids.push(graph.edges[first].subject.clone());
    }
    Err(Error::CycleDetected(ids))
}
