//! Edge orientation: precedence from the oracle, the size rule, completion
//! of isolated nodes and cycle breaking.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{CausalEdge, CausalSceneGraph, EdgeStatus, ObjectId, SceneObject};
use crate::oracle::Oracle;

fn reversed(edge: &CausalEdge) -> CausalEdge {
    let mut e = edge.clone();
    std::mem::swap(&mut e.subject, &mut e.target);
    // a word without a converse is kept as is
    e.relation = edge.relation.inverse().unwrap_or(edge.relation);
    e
}

fn endpoint<'a>(nodes: &'a BTreeMap<ObjectId, SceneObject>, id: &ObjectId) -> Result<&'a SceneObject> {
    nodes
        .get(id)
        .ok_or_else(|| Error::UnknownObject(id.to_string()))
}

/// Orients `edge` so the subject depends on the target. The edge is reversed
/// only when the oracle is strictly more confident in the other direction.
pub fn order_edge(
    edge: &CausalEdge,
    nodes: &BTreeMap<ObjectId, SceneObject>,
    oracle: &dyn Oracle,
) -> Result<CausalEdge> {
    let a = endpoint(nodes, &edge.subject)?;
    let b = endpoint(nodes, &edge.target)?;
    let p = oracle.precedence(a, b)?;
    let mut out = if p.c_ji > p.c_ij { reversed(edge) } else { edge.clone() };
    out.status = EdgeStatus::Ordered;
    Ok(out)
}

/// Points the edge at the larger object. Edges already ordered are left
/// alone so the causal direction wins.
pub fn apply_size_rule(edge: &CausalEdge, nodes: &BTreeMap<ObjectId, SceneObject>) -> Result<CausalEdge> {
    if edge.status == EdgeStatus::Ordered {
        return Ok(edge.clone());
    }
    let a = endpoint(nodes, &edge.subject)?;
    let b = endpoint(nodes, &edge.target)?;
    if a.volume_cm3() > b.volume_cm3() {
        Ok(reversed(edge))
    } else {
        Ok(edge.clone())
    }
}

/// Size rule then precedence over every Proposed edge. When two active edges
/// end up on the same ordered pair, the one with the higher prior survives
/// (the earlier one on a tie) and the other is removed.
pub fn order_graph(graph: &CausalSceneGraph, oracle: &dyn Oracle) -> Result<CausalSceneGraph> {
    let nodes = graph.nodes();
    let mut edges = Vec::with_capacity(graph.edges().len());
    for e in graph.edges() {
        if e.status != EdgeStatus::Proposed {
            edges.push(e.clone());
            continue;
        }
        let sized = apply_size_rule(e, nodes)?;
        edges.push(order_edge(&sized, nodes, oracle)?);
    }
    dedupe_pairs(&mut edges);
    graph.with_edges(edges)
}

fn dedupe_pairs(edges: &mut [CausalEdge]) {
    let mut best: BTreeMap<(ObjectId, ObjectId), usize> = BTreeMap::new();
    let mut drop = Vec::new();
    for i in 0..edges.len() {
        if !edges[i].is_active() {
            continue;
        }
        let key = (edges[i].subject.clone(), edges[i].target.clone());
        match best.get(&key) {
            None => {
                best.insert(key, i);
            }
            Some(&j) if edges[i].prior > edges[j].prior => {
                drop.push(j);
                best.insert(key, i);
            }
            Some(_) => drop.push(i),
        }
    }
    for i in drop {
        edges[i].status = EdgeStatus::Removed;
    }
}

/// Asks the oracle for one edge per isolated node and appends it as
/// Proposed. Nodes that stop being isolated along the way are skipped.
pub fn complete_edges(graph: &CausalSceneGraph, oracle: &dyn Oracle) -> Result<CausalSceneGraph> {
    let mut current = graph.clone();
    for id in graph.isolated_nodes() {
        if !current.isolated_nodes().contains(&id) {
            continue;
        }
        let edge = oracle
            .complete_edge(&current, &id)?
            .filter(|e| {
                (e.subject == id || e.target == id)
                    && e.subject != e.target
                    && current.nodes().contains_key(&e.subject)
                    && current.nodes().contains_key(&e.target)
            })
            .ok_or_else(|| Error::CompletionFailed(id.clone()))?;
        let mut edges = current.edges().to_vec();
        edges.push(CausalEdge {
            posterior: None,
            status: EdgeStatus::Proposed,
            ..edge
        });
        current = current.with_edges(edges)?;
    }
    Ok(current)
}

/// Removes one edge per cycle until the active edges form a DAG: the cycle
/// edge with the lowest prior, then the smallest (subject, target).
pub fn enforce_dag(graph: &CausalSceneGraph) -> Result<CausalSceneGraph> {
    let mut current = graph.clone();
    while let Some(cycle) = current.find_cycle() {
        let edges = current.edges();
        let victim = *cycle
            .iter()
            .min_by(|&&a, &&b| {
                let (ea, eb) = (&edges[a], &edges[b]);
                ea.prior
                    .total_cmp(&eb.prior)
                    .then_with(|| ea.pair().cmp(&eb.pair()))
            })
            .expect("a cycle has edges");
        let mut edges = edges.to_vec();
        edges[victim].status = EdgeStatus::Removed;
        current = current.with_edges(edges)?;
    }
    Ok(current)
}

/// Sets every active edge's prior from the oracle.
pub fn assign_priors(graph: &CausalSceneGraph, oracle: &dyn Oracle) -> Result<CausalSceneGraph> {
    let mut edges = graph.edges().to_vec();
    for e in edges.iter_mut().filter(|e| e.is_active()) {
        let p = oracle.edge_prior(e)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::MalformedResponse(format!("prior {p} for {e}")));
        }
        e.prior = p;
    }
    graph.with_edges(edges)
}

/// Object pairs joined by an active edge, unordered.
pub fn connected_pairs(graph: &CausalSceneGraph) -> BTreeSet<(ObjectId, ObjectId)> {
    graph
        .active_edges()
        .map(|e| {
            let (a, b) = e.pair();
            if a < b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            }
        })
        .collect()
}
