use std::collections::BTreeSet;

use super::{aabb_overlap, Aabb, LayoutScene, OVERLAP_TOL};
use crate::graph::ObjectId;

/// Pushes apart unrelated objects whose boxes interpenetrate.
pub fn resolve_overlaps(scene: &LayoutScene) -> LayoutScene {
    resolve(scene, None)
}

/// Like [`resolve_overlaps`], but only objects in `movable` may be moved.
pub fn resolve_overlaps_within(scene: &LayoutScene, movable: &BTreeSet<ObjectId>) -> LayoutScene {
    resolve(scene, Some(movable))
}

/// Objects are settled in placement order, fixed ones first. A movable
/// object that hits something already settled is shifted horizontally,
/// together with everything placed against it, by the shortest push that
/// clears every settled box. If no single push does, it goes past the right
/// edge of the scene.
fn resolve(scene: &LayoutScene, movable: Option<&BTreeSet<ObjectId>>) -> LayoutScene {
    let mut out = scene.clone();
    let order: Vec<ObjectId> = out.order.clone();
    let can_move = |id: &ObjectId| movable.is_none_or(|m| m.contains(id));
    let contained = out.containment_pairs();
    // contact pairs touch without interpenetrating, so only containment is exempt
    let related = |a: &ObjectId, b: &ObjectId| {
        contained.contains(&(a.clone(), b.clone())) || contained.contains(&(b.clone(), a.clone()))
    };

    let mut stuck = Vec::new();
    let mut settled: Vec<ObjectId> = order.iter().filter(|id| !can_move(id)).cloned().collect();
    for (i, a) in settled.iter().enumerate() {
        for b in &settled[i + 1..] {
            if !related(a, b) && aabb_overlap(&out.objects[a].aabb(), &out.objects[b].aabb()) > OVERLAP_TOL {
                stuck.push((a.clone(), b.clone()));
            }
        }
    }

    for id in order.iter().filter(|id| can_move(id)) {
        let others: Vec<Aabb> = settled
            .iter()
            .filter(|o| !related(id, o))
            .map(|o| out.objects[o].aabb())
            .collect();
        let m = out.objects[id].aabb();
        let clear = |b: &Aabb| others.iter().all(|o| aabb_overlap(b, o) <= OVERLAP_TOL);
        if clear(&m) {
            settled.push(id.clone());
            continue;
        }
        let mut group = vec![id.clone()];
        group.extend(out.descendants(id));
        if let Some(fixed) = group.iter().find(|g| !can_move(g)) {
            stuck.push((id.clone(), fixed.clone()));
            settled.push(id.clone());
            continue;
        }

        let mut pushes: Vec<[f64; 2]> = others
            .iter()
            .flat_map(|o| {
                [
                    [o.max[0] - m.min[0], 0.0],
                    [o.min[0] - m.max[0], 0.0],
                    [0.0, o.max[1] - m.min[1]],
                    [0.0, o.min[1] - m.max[1]],
                ]
            })
            .collect();
        pushes.sort_by(|p, q| (p[0].abs() + p[1].abs()).total_cmp(&(q[0].abs() + q[1].abs())));
        let shifted = |d: [f64; 2]| Aabb {
            min: [m.min[0] + d[0], m.min[1] + d[1], m.min[2]],
            max: [m.max[0] + d[0], m.max[1] + d[1], m.max[2]],
        };
        let delta = pushes.into_iter().find(|d| clear(&shifted(*d))).unwrap_or_else(|| {
            let right = out
                .objects
                .values()
                .filter(|o| !group.contains(&o.id))
                .map(|o| o.aabb().max[0])
                .fold(m.max[0], f64::max);
            [right - m.min[0], 0.0]
        });
        for g in &group {
            let o = out.objects.get_mut(g).expect("group members exist");
            o.center[0] += delta[0];
            o.center[1] += delta[1];
        }
        settled.push(id.clone());
    }

    resnap(&mut out, &can_move);
    for (a, b) in stuck {
        out.diagnostics.push(format!("unresolved overlap between {a} and {b}"));
    }
    out
}

/// Puts every movable support-contact subject back onto its target's top
/// face. Fixed objects are left alone, even by a rounding step.
fn resnap(scene: &mut LayoutScene, can_move: &dyn Fn(&ObjectId) -> bool) {
    let order = scene.order.clone();
    for id in order.iter().filter(|id| can_move(id)) {
        let Some(a) = scene.objects[id].anchor.clone() else { continue };
        if !a.relation.is_support_contact() {
            continue;
        }
        let top = scene.objects[&a.target].aabb().max[2];
        let bottom = scene.objects[id].aabb().min[2];
        if bottom != top {
            scene.translate_with_riders(id, [0.0, 0.0, top - bottom]);
        }
    }
}
