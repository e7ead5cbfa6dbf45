//! Local edits to a finished scene. Only the edited object, objects whose
//! anchor changes, and whatever rides on them are re-placed; every other
//! object keeps its exact placement.

use std::collections::{BTreeMap, BTreeSet};

use crate::bayes::{edge_posterior, update_strategy, Decision, EdgeAssessment};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::grammar::slug;
use crate::graph::{
    topological_order, CausalEdge, CausalSceneGraph, Dims, EdgeStatus, ObjectId, SceneObject, SpatialRelation,
};
use crate::intervention::{intervene, InterventionResult};
use crate::layout::{
    anchors, assemble_fscene, resolve_overlaps_within, Anchor, LayoutScene, PlacedObject, Placement, Renderer,
    SvgRenderer, Viewpoint,
};
use crate::oracle::{GroundTruth, Oracle};
use crate::order::{enforce_dag, order_graph};
use crate::pid::{optimize_attribute, refine_edge_attributes, AttributeKind, AttributeTarget, PidController, Trace};
use crate::pipeline::{truth_from_graph, Artifacts};

#[derive(Debug, Clone, PartialEq)]
pub enum EditCommand {
    Add {
        object: SceneObject,
        relation: SpatialRelation,
        target: ObjectId,
    },
    Remove(ObjectId),
    Move {
        id: ObjectId,
        relation: SpatialRelation,
        target: ObjectId,
    },
    Rescale {
        id: ObjectId,
        factor: f64,
    },
}

fn fields(arg: &str, n: std::ops::RangeInclusive<usize>, usage: &str) -> Result<Vec<String>> {
    let parts: Vec<String> = arg.split(',').map(|s| s.trim().to_string()).collect();
    if !n.contains(&parts.len()) || parts.iter().any(String::is_empty) {
        return Err(Error::Grammar(format!("expected {usage}, got `{arg}`")));
    }
    Ok(parts)
}

fn positive(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v > 0.0)
        .ok_or_else(|| Error::Grammar(format!("`{s}` is not a positive number")))
}

impl EditCommand {
    /// `NAME,L,W,H,RELATION,TARGET[,ASSET]`, dimensions in centimeters. The
    /// new id is the name's slug with the first free number.
    pub fn parse_add(graph: &CausalSceneGraph, arg: &str) -> Result<Self> {
        let f = fields(arg, 6..=7, "NAME,L,W,H,RELATION,TARGET[,ASSET]")?;
        let base = slug(&f[0]);
        let id = (1..)
            .map(|n| ObjectId::new(format!("{base}-{n}")))
            .find(|id| !graph.nodes().contains_key(id))
            .expect("unbounded range");
        let mut object = SceneObject::new(
            id,
            f[0].clone(),
            Dims::new(positive(&f[1])?, positive(&f[2])?, positive(&f[3])?),
        )?;
        object.asset_ref = f.get(6).cloned();
        Ok(EditCommand::Add {
            object,
            relation: f[4].parse()?,
            target: ObjectId::new(f[5].clone()),
        })
    }

    /// `ID,RELATION,TARGET`.
    pub fn parse_move(arg: &str) -> Result<Self> {
        let f = fields(arg, 3..=3, "ID,RELATION,TARGET")?;
        Ok(EditCommand::Move {
            id: ObjectId::new(f[0].clone()),
            relation: f[1].parse()?,
            target: ObjectId::new(f[2].clone()),
        })
    }

    /// `ID,FACTOR`.
    pub fn parse_rescale(arg: &str) -> Result<Self> {
        let f = fields(arg, 2..=2, "ID,FACTOR")?;
        Ok(EditCommand::Rescale {
            id: ObjectId::new(f[0].clone()),
            factor: positive(&f[1])?,
        })
    }

    fn check(&self, graph: &CausalSceneGraph) -> Result<()> {
        match self {
            EditCommand::Add { object, target, .. } => {
                if graph.nodes().contains_key(&object.id) {
                    return Err(Error::InvalidObject {
                        id: object.id.to_string(),
                        reason: "id already in use".into(),
                    });
                }
                object.validate()?;
                graph.node(target)?;
            }
            EditCommand::Remove(id) => {
                graph.node(id)?;
            }
            EditCommand::Move { id, target, .. } => {
                graph.node(id)?;
                graph.node(target)?;
                if id == target {
                    return Err(Error::Precondition(format!("cannot move `{id}` relative to itself")));
                }
            }
            EditCommand::Rescale { id, factor } => {
                graph.node(id)?;
                if !(factor.is_finite() && *factor > 0.0) {
                    return Err(Error::Precondition(format!("scale factor {factor} must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// Truth for a deterministic oracle judging an edit: the graph as it
/// stands with the edit taken as correct. Dependents of a removed object
/// inherit its support.
pub fn edit_truth(graph: &CausalSceneGraph, cmd: &EditCommand) -> GroundTruth {
    let mut t = truth_from_graph(graph);
    match cmd {
        EditCommand::Add { object, relation, target } => {
            t.true_relations
                .insert((object.id.clone(), target.clone()), *relation);
            t.true_scales.insert(object.id.clone(), object.scale);
            t = t.with_defaults_for([&object.id]);
        }
        EditCommand::Remove(id) => {
            let support = anchors(graph).remove(id);
            let dependents: Vec<(ObjectId, SpatialRelation)> = graph
                .active_edges()
                .filter(|e| &e.target == id)
                .map(|e| (e.subject.clone(), e.relation))
                .collect();
            t.true_relations.retain(|(s, g), _| s != id && g != id);
            if let Some(a) = support {
                for (d, r) in dependents {
                    if d != a.target {
                        t.true_relations.entry((d, a.target.clone())).or_insert(r);
                    }
                }
            }
        }
        EditCommand::Move { id, relation, target } => {
            if let Some(a) = anchors(graph).remove(id) {
                t.true_relations.remove(&(id.clone(), a.target));
            }
            t.true_relations.insert((id.clone(), target.clone()), *relation);
        }
        EditCommand::Rescale { id, factor } => {
            if let Ok(n) = graph.node(id) {
                t.true_scales.insert(id.clone(), n.scale * factor);
            }
        }
    }
    t
}

#[derive(Debug, Clone)]
pub struct EditOutcome {
    pub artifacts: Artifacts,
    /// Objects that were allowed to move.
    pub affected: BTreeSet<ObjectId>,
}

struct Screened {
    graph: CausalSceneGraph,
    assessments: Vec<EdgeAssessment>,
    interventions: Vec<InterventionResult>,
}

/// Orders, scores and settles the Proposed edges at `indices`. Other edges
/// are left as they are.
fn screen_new_edges(
    graph: &CausalSceneGraph,
    indices: &[usize],
    scene: &LayoutScene,
    config: &PipelineConfig,
    oracle: &dyn Oracle,
) -> Result<Screened> {
    let mut g = order_graph(graph, oracle)?;
    let mut edges = g.edges().to_vec();
    for &i in indices {
        if edges[i].is_active() {
            edges[i].prior = oracle.edge_prior(&edges[i])?;
        }
    }
    g = enforce_dag(&g.with_edges(edges)?)?;

    let active: Vec<CausalEdge> = g.active_edges().cloned().collect();
    let k = config.oracle.trials_k;
    let mut assessments = Vec::new();
    let mut interventions = Vec::new();
    let mut chosen = BTreeMap::new();
    for &i in indices {
        let edge = &g.edges()[i];
        if !edge.is_active() {
            continue;
        }
        let post = edge_posterior(edge, &active, oracle, k)?;
        let decision = if post > config.tau1 { Decision::Keep } else { Decision::Intervene };
        if decision == Decision::Intervene {
            let mut base = scene.clone();
            if base.get(&edge.subject).is_ok() && base.get(&edge.target).is_ok() {
                base.set_anchor(
                    &edge.subject,
                    Some(Anchor {
                        relation: edge.relation,
                        target: edge.target.clone(),
                    }),
                )?;
            }
            let r = intervene(edge, &base, &SvgRenderer::default(), oracle, k, &config.layout)?;
            chosen.insert(i, (r.s_star, r.s_star_posterior));
            interventions.push(r);
        }
        assessments.push(EdgeAssessment {
            index: i,
            edge: edge.clone(),
            prior: edge.prior,
            fraction: f64::NAN,
            likelihood: f64::NAN,
            alt_likelihood: f64::NAN,
            posterior: post,
            decision,
        });
    }
    let graph = update_strategy(&g, &assessments, config.tau1, config.tau2, &chosen)?;
    Ok(Screened {
        graph,
        assessments,
        interventions,
    })
}

fn new_root_center(scene: &LayoutScene, dims: &Dims, spacing: f64) -> [f64; 3] {
    let right = scene
        .objects()
        .values()
        .map(|o| o.aabb().max[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let ext = dims.extents_m(1.0);
    let x = if right.is_finite() { right + spacing } else { 0.0 };
    [x + 0.5 * ext[0], 0.0, 0.5 * ext[2]]
}

/// Applies `cmd` to a finished graph (positions and scales on its nodes)
/// and returns the updated artifacts.
pub fn apply_edit(
    graph: &CausalSceneGraph,
    cmd: &EditCommand,
    config: &PipelineConfig,
    oracle: &dyn Oracle,
) -> Result<EditOutcome> {
    cmd.check(graph)?;
    let mut scene = LayoutScene::from_graph(graph)?;
    let before_anchors = anchors(graph);
    let mut changed: BTreeSet<ObjectId> = BTreeSet::new();
    let mut removed: Option<ObjectId> = None;
    let mut new_edges: Vec<usize> = Vec::new();

    let edited: CausalSceneGraph = match cmd {
        EditCommand::Add { object, relation, target } => {
            let mut o = object.clone();
            o.position = new_root_center(&scene, &o.dims, config.layout.grid_spacing);
            scene.insert(PlacedObject {
                id: o.id.clone(),
                name: o.name.clone(),
                asset_ref: o.asset_ref.clone(),
                dims: o.dims,
                center: o.position,
                scale: o.scale,
                anchor: None,
            });
            changed.insert(o.id.clone());
            let (nodes, mut edges, meta) = graph.clone().into_parts();
            new_edges.push(edges.len());
            edges.push(CausalEdge::new(o.id.clone(), *relation, target.clone()));
            CausalSceneGraph::new(nodes.into_values().chain([o]), edges, meta)?
        }
        EditCommand::Remove(id) => {
            let dependents: BTreeSet<ObjectId> = graph
                .active_edges()
                .filter(|e| &e.target == id)
                .map(|e| e.subject.clone())
                .collect();
            let (mut nodes, edges, meta) = graph.clone().into_parts();
            nodes.remove(id);
            let edges: Vec<CausalEdge> = edges
                .into_iter()
                .filter(|e| &e.subject != id && &e.target != id)
                .collect();
            let mut g = CausalSceneGraph::new(nodes.into_values(), edges, meta)?;
            scene.remove(id);
            removed = Some(id.clone());
            for d in &dependents {
                if g.active_edges().any(|e| &e.subject == d) {
                    continue;
                }
                changed.insert(d.clone());
                let offered = oracle.complete_edge(&g, d)?.filter(|e| {
                    e.subject != e.target
                        && (&e.subject == d || &e.target == d)
                        && g.nodes().contains_key(&e.subject)
                        && g.nodes().contains_key(&e.target)
                        && !g.active_edges().any(|x| x.pair() == e.pair())
                });
                match offered {
                    Some(e) => {
                        let mut edges = g.edges().to_vec();
                        new_edges.push(edges.len());
                        edges.push(CausalEdge {
                            status: EdgeStatus::Proposed,
                            posterior: None,
                            ..e
                        });
                        g = g.with_edges(edges)?;
                    }
                    None => scene
                        .diagnostics
                        .push(format!("{d} lost its support and rests on the ground")),
                }
            }
            g
        }
        EditCommand::Move { id, relation, target } => {
            let mut edges = graph.edges().to_vec();
            if let Some(a) = before_anchors.get(id) {
                if let Some(e) = edges
                    .iter_mut()
                    .find(|e| e.is_active() && &e.subject == id && e.target == a.target)
                {
                    e.status = EdgeStatus::Removed;
                }
            }
            let user = CausalEdge {
                prior: 1.0,
                posterior: Some(1.0),
                status: EdgeStatus::Kept,
                ..CausalEdge::new(id.clone(), *relation, target.clone())
            };
            match edges
                .iter_mut()
                .find(|e| e.is_active() && &e.subject == id && &e.target == target)
            {
                Some(e) => *e = user,
                None => edges.push(user),
            }
            changed.insert(id.clone());
            graph.with_edges(edges)?
        }
        EditCommand::Rescale { id, factor } => {
            let nodes = graph.nodes().values().map(|n| {
                let mut n = n.clone();
                if &n.id == id {
                    n.scale *= factor;
                }
                n
            });
            let g = graph.with_nodes(nodes)?;
            let s = g.node(id)?.scale;
            scene.set_scale(id, s)?;
            changed.insert(id.clone());
            g
        }
    };

    let screened = if new_edges.is_empty() {
        Screened {
            graph: edited,
            assessments: Vec::new(),
            interventions: Vec::new(),
        }
    } else {
        screen_new_edges(&edited, &new_edges, &scene, config, oracle)?
    };
    let final_graph = screened.graph;

    // anchors are rederived; any object whose anchor moved is re-placed too
    let after_anchors = anchors(&final_graph);
    for id in final_graph.nodes().keys() {
        if before_anchors.get(id) != after_anchors.get(id) {
            changed.insert(id.clone());
        }
    }
    for id in final_graph.nodes().keys() {
        scene.set_anchor(id, after_anchors.get(id).cloned())?;
    }
    scene.set_order(topological_order(&final_graph)?);

    let mut affected = changed.clone();
    for c in &changed {
        affected.extend(scene.descendants(c));
    }
    // an object placed under another lifts the stack above it
    for c in changed.iter().cloned().collect::<Vec<_>>() {
        let mut cur = c;
        while let Some(a) = scene.get(&cur)?.anchor.clone().filter(|a| a.relation == SpatialRelation::Under) {
            affected.insert(a.target.clone());
            affected.extend(scene.riders(&a.target));
            cur = a.target;
        }
    }

    let order = scene.order().to_vec();
    let mut placed: BTreeSet<ObjectId> = BTreeSet::new();
    for id in order.iter().filter(|id| changed.contains(*id)) {
        if placed.contains(id) {
            continue;
        }
        scene.replace_subtree(id, &config.layout, Placement::Strict)?;
        placed.insert(id.clone());
        placed.extend(scene.descendants(id));
    }

    let renderer = SvgRenderer::default();
    let mut traces: Vec<Trace> = Vec::new();
    let refinable = |id: &ObjectId, scene: &LayoutScene| -> Option<CausalEdge> {
        let a = scene.get(id).ok()?.anchor.clone()?;
        final_graph
            .active_edges()
            .find(|e| {
                &e.subject == id
                    && e.target == a.target
                    && matches!(e.status, EdgeStatus::Kept | EdgeStatus::Modified)
            })
            .cloned()
    };
    for id in order.iter().filter(|id| changed.contains(*id)) {
        let Some(edge) = refinable(id, &scene) else {
            continue;
        };
        if let EditCommand::Rescale { .. } = cmd {
            let mut c = PidController::new(config.pid.scale)?;
            let target = AttributeTarget::new(id.clone(), AttributeKind::Scale);
            match optimize_attribute(&target, &mut scene, &edge, &renderer, oracle, &mut c, &config.layout) {
                Ok((_, t)) => traces.push(t),
                Err(a) => return Err(a.error),
            }
        } else {
            scene = refine_edge_attributes(&edge, &scene, &renderer, oracle, &config.pid, &config.layout, &mut traces)?;
        }
    }

    let mut scene = resolve_overlaps_within(&scene, &affected);
    let violations = scene.violations();
    scene.diagnostics.extend(violations);
    let out_graph = scene.write_back(&final_graph)?;
    let mut renders = Vec::new();
    for v in Viewpoint::ALL {
        renders.push(renderer.render(&scene, v)?);
    }
    if let Some(r) = removed {
        affected.insert(r);
    }
    Ok(EditOutcome {
        artifacts: Artifacts {
            fscene: assemble_fscene(&scene),
            graph: out_graph,
            scene,
            renders,
            traces,
            assessments: screened.assessments,
            interventions: screened.interventions,
        },
        affected,
    })
}
