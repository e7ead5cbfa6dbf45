use std::collections::BTreeMap;

use super::{Aabb, Anchor, LayoutOptions, LayoutScene, PlacedObject, Placement, CONTACT_TOL};
use crate::error::{Error, Result};
use crate::graph::{topological_order, CausalSceneGraph, ObjectId, SpatialRelation};

use SpatialRelation::*;

fn is_side(rel: SpatialRelation) -> bool {
    matches!(
        rel,
        Front | Left | Right | Behind | LeftFront | RightFront | LeftBack | RightBack
    )
}

/// Placement anchor per subject: its highest-confidence active outgoing
/// edge. Ties go to the smaller target id.
pub fn anchors(graph: &CausalSceneGraph) -> BTreeMap<ObjectId, Anchor> {
    let mut best: BTreeMap<ObjectId, (f64, ObjectId, SpatialRelation)> = BTreeMap::new();
    for e in graph.active_edges() {
        let c = e.confidence();
        let better = match best.get(&e.subject) {
            None => true,
            Some((bc, bt, br)) => {
                c > *bc || (c == *bc && (&e.target, e.relation) < (bt, *br))
            }
        };
        if better {
            best.insert(e.subject.clone(), (c, e.target.clone(), e.relation));
        }
    }
    best.into_iter()
        .map(|(s, (_, target, relation))| (s, Anchor { relation, target }))
        .collect()
}

/// Center of a subject with the given extents (meters) that realizes
/// `rel` against a placed target.
///
/// `ground_based` says whether the target's own floor is the ground plane,
/// which decides where an `under` subject goes. Returns `None` when an `in`
/// subject does not fit inside the target. An `under` subject of a raised
/// target may come back below the ground; callers decide what to do.
pub fn relation_offset(
    rel: SpatialRelation,
    extents: [f64; 3],
    target: &Aabb,
    ground_based: bool,
    gap: f64,
) -> Option<[f64; 3]> {
    let c = target.center();
    let half = extents.map(|e| 0.5 * e);
    let t_ext = target.extents();
    let on_top = target.max[2] + half[2];
    let grounded = half[2];
    let left_x = target.min[0] - gap - half[0];
    let right_x = target.max[0] + gap + half[0];
    let front_y = target.max[1] + gap + half[1];
    let back_y = target.min[1] - gap - half[1];
    let p = match rel {
        On => [c[0], c[1], on_top],
        Above => [c[0], c[1], on_top + gap],
        Under if ground_based => [c[0], c[1], grounded],
        Under => [c[0], c[1], target.min[2] - half[2]],
        In => {
            let fits = (0..3).all(|i| extents[i] <= t_ext[i] + CONTACT_TOL);
            if !fits {
                return None;
            }
            c
        }
        Left => [left_x, c[1], grounded],
        Right => [right_x, c[1], grounded],
        Front => [c[0], front_y, grounded],
        Behind => [c[0], back_y, grounded],
        LeftFront => [left_x, front_y, grounded],
        RightFront => [right_x, front_y, grounded],
        LeftBack => [left_x, back_y, grounded],
        RightBack => [right_x, back_y, grounded],
        LeftOn => [c[0] - 0.25 * t_ext[0], c[1], on_top],
        RightOn => [c[0] + 0.25 * t_ext[0], c[1], on_top],
        Corner => [target.min[0] + half[0], target.min[1] + half[1], on_top],
    };
    Some(p)
}

/// Places every object of `graph` with default options in strict mode.
pub fn place_graph(graph: &CausalSceneGraph) -> Result<LayoutScene> {
    place_graph_with(graph, &LayoutOptions::default(), Placement::Strict)
}

pub fn place_graph_with(
    graph: &CausalSceneGraph,
    options: &LayoutOptions,
    mode: Placement,
) -> Result<LayoutScene> {
    let order = topological_order(graph)?;
    let mut anchor_of = anchors(graph);
    let roots: Vec<&ObjectId> = graph
        .nodes()
        .keys()
        .filter(|id| !anchor_of.contains_key(*id))
        .collect();
    let ncols = (roots.len() as f64).sqrt().ceil().max(1.0) as usize;
    let grid: BTreeMap<&ObjectId, [f64; 2]> = roots
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let (row, col) = (i / ncols, i % ncols);
            (*id, [col as f64 * options.grid_spacing, row as f64 * options.grid_spacing])
        })
        .collect();

    let mut scene = LayoutScene::default();
    for id in &order {
        let node = graph.node(id)?;
        let xy = grid.get(id).copied().unwrap_or([0.0, 0.0]);
        scene.objects.insert(
            id.clone(),
            PlacedObject {
                id: id.clone(),
                name: node.name.clone(),
                asset_ref: node.asset_ref.clone(),
                dims: node.dims,
                center: [xy[0], xy[1], 0.0],
                scale: node.scale,
                anchor: anchor_of.remove(id),
            },
        );
        place_object(&mut scene, id, options, mode)?;
    }
    scene.order = order;
    scene.diagnostics.extend(unverified_constraints(&scene, graph, options));
    Ok(scene)
}

impl LayoutScene {
    /// Whether the floor beneath `id` is the ground plane.
    pub fn ground_based(&self, id: &ObjectId) -> bool {
        let mut cur = id;
        for _ in 0..=self.objects.len() {
            match self.objects.get(cur).and_then(|o| o.anchor.as_ref()) {
                None => return true,
                Some(a) if is_side(a.relation) => return true,
                Some(a) if a.relation == Under => cur = &a.target,
                Some(_) => return false,
            }
        }
        false
    }

    /// Where `id` would sit if placed against `target` with `relation`
    /// under the current layout.
    pub fn desired_center(
        &self,
        id: &ObjectId,
        relation: SpatialRelation,
        target: &ObjectId,
        gap: f64,
    ) -> Result<[f64; 3]> {
        let ext = self.get(id)?.extents();
        let tb = self.aabb(target)?;
        let mut p = relation_offset(relation, ext, &tb, self.ground_based(target), gap)
            .unwrap_or(tb.center());
        p[2] = p[2].max(0.5 * ext[2]);
        Ok(p)
    }

    /// Points `id`'s anchor at a new relation and target.
    pub fn set_anchor(&mut self, id: &ObjectId, anchor: Option<Anchor>) -> Result<()> {
        self.get_mut(id)?.anchor = anchor;
        Ok(())
    }

    pub fn set_scale(&mut self, id: &ObjectId, scale: f64) -> Result<()> {
        self.get_mut(id)?.scale = scale;
        Ok(())
    }

    pub fn set_center(&mut self, id: &ObjectId, center: [f64; 3]) -> Result<()> {
        self.get_mut(id)?.center = center;
        Ok(())
    }

    pub(crate) fn set_order(&mut self, order: Vec<ObjectId>) {
        self.order = order;
    }

    pub(crate) fn insert(&mut self, obj: PlacedObject) {
        self.objects.insert(obj.id.clone(), obj);
    }

    pub(crate) fn remove(&mut self, id: &ObjectId) -> Option<PlacedObject> {
        self.order.retain(|o| o != id);
        self.objects.remove(id)
    }

    /// Re-places `id` against its anchor, then every object whose anchor
    /// chain leads to it, in placement order.
    pub fn replace_subtree(
        &mut self,
        id: &ObjectId,
        options: &LayoutOptions,
        mode: Placement,
    ) -> Result<()> {
        let desc = self.descendants(id);
        place_object(self, id, options, mode)?;
        let order = self.order.clone();
        for o in order.iter().filter(|o| desc.contains(*o)) {
            place_object(self, o, options, mode)?;
        }
        Ok(())
    }
}

/// Positions one object against its anchor using its current scale. A root
/// keeps its horizontal position and is set down on the ground.
pub(crate) fn place_object(
    scene: &mut LayoutScene,
    id: &ObjectId,
    options: &LayoutOptions,
    mode: Placement,
) -> Result<()> {
    let obj = scene.get(id)?;
    let ext = obj.extents();
    let center = match obj.anchor.clone() {
        None => [obj.center[0], obj.center[1], 0.5 * ext[2]],
        Some(a) => {
            let tb = scene.aabb(&a.target)?;
            let gb = scene.ground_based(&a.target);
            let misfit = || Error::DoesNotFit {
                subject: id.clone(),
                relation: a.relation.to_string(),
                target: a.target.clone(),
            };
            let mut p = match relation_offset(a.relation, ext, &tb, gb, options.gap) {
                Some(p) => p,
                None if mode == Placement::Strict => return Err(misfit()),
                None => {
                    scene.diagnostics.push(format!("{id} does not fit in {}", a.target));
                    tb.center()
                }
            };
            if p[2] - 0.5 * ext[2] < -CONTACT_TOL {
                if mode == Placement::Strict {
                    return Err(misfit());
                }
                p[2] = 0.5 * ext[2];
            }
            p
        }
    };
    scene.get_mut(id)?.center = center;
    settle(scene, id);
    Ok(())
}

/// Rests a ground-based object on top of whatever is placed under it, and
/// propagates the lift up through a chain of `under` anchors.
fn settle(scene: &mut LayoutScene, id: &ObjectId) {
    let mut cur = id.clone();
    for _ in 0..=scene.objects.len() {
        if !scene.ground_based(&cur) {
            return;
        }
        let floor = scene
            .objects
            .values()
            .filter(|o| {
                o.anchor
                    .as_ref()
                    .is_some_and(|a| a.relation == Under && a.target == cur)
            })
            .map(|o| o.aabb().max[2])
            .fold(0.0_f64, f64::max);
        let bottom = scene.objects[&cur].aabb().min[2];
        if bottom != floor {
            scene.translate_with_riders(&cur, [0.0, 0.0, floor - bottom]);
        }
        match scene.objects[&cur].anchor.clone() {
            Some(a) if a.relation == Under => cur = a.target,
            _ => return,
        }
    }
}

fn unverified_constraints(
    scene: &LayoutScene,
    graph: &CausalSceneGraph,
    options: &LayoutOptions,
) -> Vec<String> {
    let mut out = Vec::new();
    for e in graph.active_edges() {
        let Ok(obj) = scene.get(&e.subject) else { continue };
        let is_anchor = obj
            .anchor
            .as_ref()
            .is_some_and(|a| a.target == e.target && a.relation == e.relation);
        if is_anchor {
            continue;
        }
        let Ok(want) = scene.desired_center(&e.subject, e.relation, &e.target, options.gap) else {
            continue;
        };
        let dist = (0..3)
            .map(|i| (want[i] - obj.center[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist > 1e-3 {
            out.push(format!("constraint {e} not realized (off by {dist:.3} m)"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CausalEdge, Dims, SceneMeta, SceneObject};
    use crate::layout::aabb_overlap;

    fn obj(id: &str, l: f64, w: f64, h: f64) -> SceneObject {
        SceneObject::new(id, id, Dims::new(l, w, h)).unwrap()
    }

    fn graph(objs: Vec<SceneObject>, edges: &[(&str, SpatialRelation, &str)]) -> CausalSceneGraph {
        let edges = edges
            .iter()
            .map(|(s, r, t)| CausalEdge::new(*s, *r, *t))
            .collect();
        CausalSceneGraph::new(objs, edges, SceneMeta::default()).unwrap()
    }

    fn table_box() -> Aabb {
        Aabb::new([-0.6, -0.3, 0.0], [0.6, 0.3, 0.75]).unwrap()
    }

    #[test]
    fn on_rests_on_top_face() {
        let p = relation_offset(On, [0.08, 0.08, 0.10], &table_box(), true, 0.05).unwrap();
        assert!((p[2] - 0.80).abs() < 1e-12);
        assert_eq!([p[0], p[1]], [0.0, 0.0]);
    }

    #[test]
    fn right_on_uses_quarter_line() {
        let p = relation_offset(RightOn, [0.1, 0.06, 0.04], &table_box(), true, 0.05).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-12);
        assert!((p[2] - 0.77).abs() < 1e-12);
        let q = relation_offset(LeftOn, [0.1, 0.06, 0.04], &table_box(), true, 0.05).unwrap();
        assert!((q[0] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn in_requires_fit() {
        let cup = Aabb::new([0.0; 3], [0.08, 0.08, 0.1]).unwrap();
        assert!(relation_offset(In, [0.5, 0.5, 0.9], &cup, true, 0.05).is_none());
        let g = graph(
            vec![obj("chair", 50.0, 50.0, 90.0), obj("cup", 8.0, 8.0, 10.0)],
            &[("chair", In, "cup")],
        );
        assert!(matches!(place_graph(&g), Err(Error::DoesNotFit { .. })));
    }

    #[test]
    fn side_relations_keep_clearance_on_ground() {
        let t = table_box();
        let ext = [0.4, 0.4, 0.9];
        for rel in [Left, Right, Front, Behind, LeftFront, RightFront, LeftBack, RightBack] {
            let p = relation_offset(rel, ext, &t, true, 0.05).unwrap();
            let b = Aabb::from_center(p, ext);
            assert_eq!(aabb_overlap(&b, &t), 0.0, "{rel}");
            assert!((b.min[2]).abs() < 1e-12);
        }
        let l = relation_offset(Left, ext, &t, true, 0.05).unwrap();
        assert!((l[0] - (-0.6 - 0.05 - 0.2)).abs() < 1e-12);
        let f = relation_offset(Front, ext, &t, true, 0.05).unwrap();
        assert!(f[1] > 0.3);
    }

    #[test]
    fn corner_is_flush_at_negative_corner() {
        let p = relation_offset(Corner, [0.1, 0.1, 0.1], &table_box(), true, 0.05).unwrap();
        assert!((p[0] + 0.55).abs() < 1e-12 && (p[1] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn cup_on_table_scene() {
        let g = graph(
            vec![obj("table", 120.0, 60.0, 75.0), obj("cup", 8.0, 8.0, 10.0)],
            &[("cup", On, "table")],
        );
        let s = place_graph(&g).unwrap();
        let t = s.aabb(&"table".into()).unwrap();
        let c = s.aabb(&"cup".into()).unwrap();
        assert!(t.min[2].abs() < 1e-12);
        assert!((c.min[2] - t.max[2]).abs() < 1e-12);
        assert!((s.get(&"cup".into()).unwrap().center[2] - 0.80).abs() < 1e-12);
        assert!(s.violations().is_empty());
    }

    #[test]
    fn empty_graph_gives_empty_scene() {
        let s = place_graph(&CausalSceneGraph::empty()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn roots_go_on_grid() {
        let g = graph(vec![obj("a", 10.0, 10.0, 10.0), obj("b", 10.0, 10.0, 10.0)], &[]);
        let s = place_graph(&g).unwrap();
        let a = s.get(&"a".into()).unwrap().center;
        let b = s.get(&"b".into()).unwrap().center;
        assert_eq!([a[0], a[1]], [0.0, 0.0]);
        assert_eq!([b[0], b[1]], [1.5, 0.0]);
    }

    #[test]
    fn under_a_grounded_target_lifts_it() {
        let g = graph(
            vec![
                obj("table", 120.0, 60.0, 75.0),
                obj("rug", 200.0, 150.0, 1.0),
                obj("cup", 8.0, 8.0, 10.0),
            ],
            &[("rug", Under, "table"), ("cup", On, "table")],
        );
        let s = place_graph(&g).unwrap();
        let t = s.aabb(&"table".into()).unwrap();
        let r = s.aabb(&"rug".into()).unwrap();
        let c = s.aabb(&"cup".into()).unwrap();
        assert!(r.min[2].abs() < 1e-12);
        assert!((t.min[2] - r.max[2]).abs() < 1e-12);
        assert!((c.min[2] - t.max[2]).abs() < 1e-12);
        assert!(s.violations().is_empty(), "{:?}", s.violations());
    }

    #[test]
    fn under_a_raised_target_below_ground_fails_strictly() {
        let g = graph(
            vec![
                obj("table", 120.0, 60.0, 75.0),
                obj("book", 20.0, 15.0, 3.0),
                obj("box", 40.0, 40.0, 90.0),
            ],
            &[("book", On, "table"), ("box", Under, "book")],
        );
        assert!(matches!(place_graph(&g), Err(Error::DoesNotFit { .. })));
        let s = place_graph_with(&g, &LayoutOptions::default(), Placement::Lenient).unwrap();
        assert!(s.aabb(&"box".into()).unwrap().min[2].abs() < 1e-12);
    }

    #[test]
    fn anchor_prefers_confidence_then_target_id() {
        let mut e1 = CausalEdge::new("cup", On, "table");
        e1.posterior = Some(0.6);
        let mut e2 = CausalEdge::new("cup", Left, "shelf");
        e2.posterior = Some(0.9);
        let g = CausalSceneGraph::new(
            [obj("cup", 8.0, 8.0, 10.0), obj("table", 100.0, 60.0, 75.0), obj("shelf", 80.0, 30.0, 180.0)],
            vec![e1.clone(), e2.clone()],
            SceneMeta::default(),
        )
        .unwrap();
        assert_eq!(anchors(&g)[&ObjectId::from("cup")].target, ObjectId::from("shelf"));
        e2.posterior = Some(0.6);
        let g = g.with_edges(vec![e1, e2]).unwrap();
        assert_eq!(anchors(&g)[&ObjectId::from("cup")].target, ObjectId::from("shelf"));
        let s = place_graph(&g).unwrap();
        assert_eq!(s.diagnostics.len(), 1);
    }

    #[test]
    fn edge_order_does_not_matter() {
        let objs = vec![
            obj("table", 120.0, 60.0, 75.0),
            obj("cup", 8.0, 8.0, 10.0),
            obj("lamp", 20.0, 20.0, 40.0),
            obj("chair", 45.0, 45.0, 90.0),
        ];
        let edges = [("cup", On, "table"), ("lamp", LeftOn, "table"), ("chair", Front, "table")];
        let a = place_graph(&graph(objs.clone(), &edges)).unwrap();
        let mut rev = edges;
        rev.reverse();
        let b = place_graph(&graph(objs, &rev)).unwrap();
        assert_eq!(a, b);
    }
}
