#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use causalstruct::graph::{CausalEdge, CausalSceneGraph, Dims, EdgeStatus, ObjectId, SceneMeta, SceneObject, SpatialRelation};
use causalstruct::oracle::GroundTruth;

pub type Triple = (ObjectId, SpatialRelation, ObjectId);

pub fn obj(id: &str, l: f64, w: f64, h: f64) -> SceneObject {
    SceneObject::new(id, id, Dims::new(l, w, h)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn relation(rng: &mut impl Rng) -> SpatialRelation {
    SpatialRelation::ALL[rng.random_range(0..SpatialRelation::ALL.len())]
}

/// Objects `o0..o{n-1}`; each later object depends on a random earlier one
/// with probability `p`.
pub fn forest(seed: u64, n: usize, p: f64) -> (Vec<SceneObject>, Vec<Triple>) {
    let mut r = rng(seed);
    let mut nodes = Vec::new();
    let mut triples = Vec::new();
    for i in 0..n {
        let id = format!("o{i}");
        let d = [0; 3].map(|_| r.random_range(5.0..150.0));
        nodes.push(obj(&id, d[0], d[1], d[2]));
        if i > 0 && r.random_bool(p) {
            let t = r.random_range(0..i);
            triples.push((ObjectId::new(id), relation(&mut r), ObjectId::new(format!("o{t}"))));
        }
    }
    (nodes, triples)
}

pub fn graph(nodes: Vec<SceneObject>, triples: &[Triple], status: EdgeStatus) -> CausalSceneGraph {
    let edges = triples
        .iter()
        .map(|(s, r, t)| CausalEdge {
            status,
            ..CausalEdge::new(s.clone(), *r, t.clone())
        })
        .collect();
    CausalSceneGraph::new(nodes, edges, SceneMeta::default()).unwrap()
}

pub fn truth(triples: &[Triple], g: &CausalSceneGraph) -> GroundTruth {
    let mut t = GroundTruth::default();
    for (s, r, o) in triples {
        t.true_relations.insert((s.clone(), o.clone()), *r);
    }
    t.with_defaults_for(g.nodes().keys())
}

/// Structured prompt for a forest, with the relations as truth statements.
pub fn prompt(nodes: &[SceneObject], triples: &[Triple]) -> String {
    let mut parts: Vec<String> = nodes
        .iter()
        .map(|n| format!("obj({},{},{},{})", n.name, n.dims.length_cm, n.dims.width_cm, n.dims.height_cm))
        .collect();
    for (s, r, t) in triples {
        parts.push(format!("rel({s},{r},{t})"));
        parts.push(format!("truth({s},{r},{t})"));
    }
    parts.join("; ")
}
