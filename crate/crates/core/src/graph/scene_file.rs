//! The scene file: a JSON document with `nodes`, `edges` and `meta` sections.
//!
//! Edges are encoded as positional arrays
//! `[subject, relation, target, prior, posterior, status]`. Field order is
//! fixed so re-exporting an unchanged graph is byte-identical.

use serde::{Deserialize, Serialize};

use super::{CausalEdge, CausalSceneGraph, Dims, EdgeStatus, ObjectId, SceneMeta, SceneObject};
use crate::error::{Error, Result};

pub const SCENE_VERSION: &str = "causalstruct-scene/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
    meta: MetaDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    name: String,
    dims_cm: [f64; 3],
    position_m: [f64; 3],
    scale: f64,
    asset_ref: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc(
    String,
    super::SpatialRelation,
    String,
    f64,
    Option<f64>,
    EdgeStatus,
);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaDoc {
    prompt: String,
    version: String,
}

pub fn encode_scene(graph: &CausalSceneGraph) -> String {
    let doc = SceneDoc {
        nodes: graph
            .nodes()
            .values()
            .map(|n| NodeDoc {
                id: n.id.to_string(),
                name: n.name.clone(),
                dims_cm: n.dims.as_array(),
                position_m: n.position,
                scale: n.scale,
                asset_ref: n.asset_ref.clone(),
            })
            .collect(),
        edges: graph
            .edges()
            .iter()
            .map(|e| {
                EdgeDoc(
                    e.subject.to_string(),
                    e.relation,
                    e.target.to_string(),
                    e.prior,
                    e.posterior,
                    e.status,
                )
            })
            .collect(),
        meta: MetaDoc {
            prompt: graph.meta().prompt.clone(),
            version: SCENE_VERSION.to_string(),
        },
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("scene document serializes");
    text.push('\n');
    text
}

pub fn decode_scene(text: &str) -> Result<CausalSceneGraph> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
    if doc.meta.version != SCENE_VERSION {
        return Err(Error::Decode(format!(
            "unsupported scene version `{}`",
            doc.meta.version
        )));
    }
    let nodes = doc.nodes.into_iter().map(|n| SceneObject {
        id: ObjectId::new(n.id),
        name: n.name,
        dims: Dims::new(n.dims_cm[0], n.dims_cm[1], n.dims_cm[2]),
        position: n.position_m,
        scale: n.scale,
        asset_ref: n.asset_ref,
    });
    let edges = doc
        .edges
        .into_iter()
        .map(|EdgeDoc(s, relation, t, prior, posterior, status)| CausalEdge {
            subject: ObjectId::new(s),
            relation,
            target: ObjectId::new(t),
            prior,
            posterior,
            status,
        })
        .collect();
    CausalSceneGraph::new(nodes, edges, SceneMeta { prompt: doc.meta.prompt })
        .map_err(|e| Error::Decode(e.to_string()))
}

pub fn roundtrip_scene(graph: &CausalSceneGraph) -> Result<CausalSceneGraph> {
    decode_scene(&encode_scene(graph))
}
