//! Geometric realization of a scene graph as axis-aligned boxes.
//!
//! Axis convention seen from the front viewpoint: +x right, +y front, +z up.
//! The ground plane is z = 0.

mod aabb;
pub mod fscene;
mod place;
pub mod render;
mod resolve;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{CausalSceneGraph, Dims, ObjectId, SpatialRelation};

pub use aabb::{aabb_overlap, Aabb};
pub use fscene::{assemble_fscene, decode_fscene, encode_fscene, FScene, FSceneRecord, LAYOUT_VERSION};
pub use place::{anchors, place_graph, place_graph_with, relation_offset};
pub use render::{render_view, RenderedView, Renderer, SvgRenderer, Viewpoint};
pub use resolve::{resolve_overlaps, resolve_overlaps_within};

/// Ground and contact tolerance, meters.
pub const CONTACT_TOL: f64 = 1e-6;
/// Overlap volume below which two boxes count as separated, cubic meters.
pub const OVERLAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutOptions {
    /// Clearance for non-contact relations, meters.
    pub gap: f64,
    /// Spacing of the grid that root objects are laid out on, meters.
    pub grid_spacing: f64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            gap: 0.05,
            grid_spacing: 1.5,
        }
    }
}

/// How placement treats relations it cannot realize exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Fail with [`Error::DoesNotFit`].
    Strict,
    /// Fall back to the nearest realizable pose (used for provisional layouts).
    Lenient,
}

/// The edge an object is placed against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anchor {
    pub relation: SpatialRelation,
    pub target: ObjectId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub id: ObjectId,
    pub name: String,
    pub asset_ref: Option<String>,
    pub dims: Dims,
    pub center: [f64; 3],
    pub scale: f64,
    pub anchor: Option<Anchor>,
}

impl PlacedObject {
    pub fn extents(&self) -> [f64; 3] {
        self.dims.extents_m(self.scale)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_center(self.center, self.extents())
    }
}

/// A placed scene: per-object asset, center and scale plus the derived boxes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayoutScene {
    objects: BTreeMap<ObjectId, PlacedObject>,
    order: Vec<ObjectId>,
    pub diagnostics: Vec<String>,
}

impl LayoutScene {
    pub fn objects(&self) -> &BTreeMap<ObjectId, PlacedObject> {
        &self.objects
    }

    /// Placement order (topological, anchors first).
    pub fn order(&self) -> &[ObjectId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: &ObjectId) -> Result<&PlacedObject> {
        self.objects
            .get(id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    pub(crate) fn get_mut(&mut self, id: &ObjectId) -> Result<&mut PlacedObject> {
        self.objects
            .get_mut(id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    pub fn aabb(&self, id: &ObjectId) -> Result<Aabb> {
        self.get(id).map(PlacedObject::aabb)
    }

    /// Rebuilds a scene from the positions and scales stored on graph nodes.
    pub fn from_graph(graph: &CausalSceneGraph) -> Result<Self> {
        let order = crate::graph::topological_order(graph)?;
        let mut anchors = anchors(graph);
        let objects = graph
            .nodes()
            .values()
            .map(|n| {
                let placed = PlacedObject {
                    id: n.id.clone(),
                    name: n.name.clone(),
                    asset_ref: n.asset_ref.clone(),
                    dims: n.dims,
                    center: n.position,
                    scale: n.scale,
                    anchor: anchors.remove(&n.id),
                };
                (n.id.clone(), placed)
            })
            .collect();
        Ok(LayoutScene {
            objects,
            order,
            diagnostics: Vec::new(),
        })
    }

    /// Copies centers and scales back onto the graph's nodes.
    pub fn write_back(&self, graph: &CausalSceneGraph) -> Result<CausalSceneGraph> {
        let nodes = graph.nodes().values().map(|n| {
            let mut n = n.clone();
            if let Some(p) = self.objects.get(&n.id) {
                n.position = p.center;
                n.scale = p.scale;
            }
            n
        });
        graph.with_nodes(nodes)
    }

    /// Objects that move together with `id`, transitively, excluding `id`.
    pub fn riders(&self, id: &ObjectId) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut frontier = vec![id.clone()];
        while let Some(cur) = frontier.pop() {
            for o in self.objects.values() {
                if let Some(a) = &o.anchor {
                    if a.target == cur && a.relation.rides_target() {
                        out.push(o.id.clone());
                        frontier.push(o.id.clone());
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Every object whose anchor chain leads to `id`, excluding `id`.
    pub fn descendants(&self, id: &ObjectId) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![id.clone()];
        while let Some(cur) = frontier.pop() {
            for o in self.objects.values() {
                if o.anchor.as_ref().is_some_and(|a| a.target == cur) && out.insert(o.id.clone()) {
                    frontier.push(o.id.clone());
                }
            }
        }
        out
    }

    /// Pairs `(inner, outer)` where `inner` sits inside `outer` through an
    /// `in` anchor, possibly after a chain of riding anchors.
    pub fn containment_pairs(&self) -> BTreeSet<(ObjectId, ObjectId)> {
        let mut pairs = BTreeSet::new();
        for start in self.objects.keys() {
            let mut cur = start.clone();
            let mut guard = 0;
            while let Some(a) = self.objects.get(&cur).and_then(|o| o.anchor.as_ref()) {
                if !a.relation.rides_target() || guard > self.objects.len() {
                    break;
                }
                if a.relation == SpatialRelation::In {
                    pairs.insert((start.clone(), a.target.clone()));
                }
                cur = a.target.clone();
                guard += 1;
            }
        }
        pairs
    }

    /// True when `a` anchors `b`, `b` anchors `a`, or one contains the other.
    pub fn are_related(&self, a: &ObjectId, b: &ObjectId) -> bool {
        let anchored = |x: &ObjectId, y: &ObjectId| {
            self.objects
                .get(x)
                .and_then(|o| o.anchor.as_ref())
                .is_some_and(|an| &an.target == y)
        };
        if anchored(a, b) || anchored(b, a) {
            return true;
        }
        let pairs = self.containment_pairs();
        pairs.contains(&(a.clone(), b.clone())) || pairs.contains(&(b.clone(), a.clone()))
    }

    /// Translates `id` and everything riding on it.
    pub(crate) fn translate_with_riders(&mut self, id: &ObjectId, delta: [f64; 3]) -> Vec<ObjectId> {
        let mut moved = vec![id.clone()];
        moved.extend(self.riders(id));
        for m in &moved {
            if let Some(o) = self.objects.get_mut(m) {
                for (c, d) in o.center.iter_mut().zip(delta) {
                    *c += d;
                }
            }
        }
        moved
    }

    /// Layout invariant violations: overlaps between non-containment pairs,
    /// broken support contacts, and boxes below the ground plane.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let contained = self.containment_pairs();
        let ids: Vec<&ObjectId> = self.objects.keys().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                if contained.contains(&((*a).clone(), (*b).clone()))
                    || contained.contains(&((*b).clone(), (*a).clone()))
                {
                    continue;
                }
                let v = aabb_overlap(&self.objects[*a].aabb(), &self.objects[*b].aabb());
                if v > OVERLAP_TOL {
                    out.push(format!("overlap {a} / {b}: {v:.3e} m^3"));
                }
            }
        }
        for o in self.objects.values() {
            let bx = o.aabb();
            if bx.min[2] < -CONTACT_TOL {
                out.push(format!("{} below ground: min z = {}", o.id, bx.min[2]));
            }
            if let Some(a) = &o.anchor {
                if a.relation.is_support_contact() {
                    if let Some(t) = self.objects.get(&a.target) {
                        let err = (bx.min[2] - t.aabb().max[2]).abs();
                        if err > CONTACT_TOL {
                            out.push(format!("{} {} {}: contact error {err:.3e} m", o.id, a.relation, a.target));
                        }
                    }
                }
            }
        }
        out
    }
}
