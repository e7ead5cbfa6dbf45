//! Forced re-placements of an uncertain edge. The subject is moved into each
//! alternative relation, the scene is rendered, and the oracle's verdicts
//! are tallied per relation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{CausalEdge, SpatialRelation};
use crate::layout::{Anchor, LayoutOptions, LayoutScene, Placement, Renderer, Viewpoint};
use crate::oracle::Oracle;

pub type StateDistribution = BTreeMap<SpatialRelation, f64>;

/// Every vocabulary word except the edge's current relation.
pub fn candidate_states(edge: &CausalEdge) -> Vec<SpatialRelation> {
    SpatialRelation::ALL
        .into_iter()
        .filter(|r| *r != edge.relation)
        .collect()
}

/// Forces `edge` to relation `r`, renders the result and returns the vote
/// share of each relation over `k` judgment trials. Malformed answers cast
/// no vote.
pub fn state_probability(
    edge: &CausalEdge,
    r: SpatialRelation,
    scene: &LayoutScene,
    renderer: &dyn Renderer,
    oracle: &dyn Oracle,
    k: usize,
    options: &LayoutOptions,
) -> Result<StateDistribution> {
    if k == 0 {
        return Err(Error::Precondition("trial count must be at least 1".into()));
    }
    scene.get(&edge.target)?;
    let mut forced = scene.clone();
    forced.set_anchor(
        &edge.subject,
        Some(Anchor {
            relation: r,
            target: edge.target.clone(),
        }),
    )?;
    forced.replace_subtree(&edge.subject, options, Placement::Lenient)?;
    let image = renderer.render(&forced, Viewpoint::ThreeQuarter)?;
    let shown = CausalEdge {
        relation: r,
        ..edge.clone()
    };
    let mut counts: BTreeMap<SpatialRelation, usize> = BTreeMap::new();
    for trial in 0..k {
        match oracle.intervention_judgment(&shown, &image, trial) {
            Ok(j) => *counts.entry(j.vote(r)).or_default() += 1,
            Err(Error::MalformedResponse(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(counts
        .into_iter()
        .map(|(s, c)| (s, c as f64 / k as f64))
        .collect())
}

/// Sums the per-intervention distributions and picks the heaviest state.
/// The mass is divided by the number of interventions; ties go to the
/// earlier vocabulary word.
pub fn select_state(results: &[(SpatialRelation, StateDistribution)]) -> Result<(SpatialRelation, f64, StateDistribution)> {
    if results.is_empty() {
        return Err(Error::Precondition("no intervention results".into()));
    }
    let n = results.len() as f64;
    let mut mass: StateDistribution = BTreeMap::new();
    for (_, dist) in results {
        for (s, p) in dist {
            *mass.entry(*s).or_default() += p;
        }
    }
    let mut best: Option<(SpatialRelation, f64)> = None;
    for s in SpatialRelation::ALL {
        let m = mass.get(&s).copied().unwrap_or(0.0);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((s, m));
        }
    }
    let (s, m) = best.expect("vocabulary is not empty");
    let normalized = mass.into_iter().map(|(k, v)| (k, v / n)).collect();
    Ok((s, (m / n).clamp(0.0, 1.0), normalized))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionResult {
    pub edge: CausalEdge,
    /// Summed vote mass per state divided by the number of interventions.
    pub distribution: StateDistribution,
    pub s_star: SpatialRelation,
    pub s_star_posterior: f64,
}

/// Runs one intervention per candidate state and selects the winner.
pub fn intervene(
    edge: &CausalEdge,
    scene: &LayoutScene,
    renderer: &dyn Renderer,
    oracle: &dyn Oracle,
    k: usize,
    options: &LayoutOptions,
) -> Result<InterventionResult> {
    let mut results = Vec::new();
    for r in candidate_states(edge) {
        results.push((r, state_probability(edge, r, scene, renderer, oracle, k, options)?));
    }
    let (s_star, p, distribution) = select_state(&results)?;
    Ok(InterventionResult {
        edge: edge.clone(),
        distribution,
        s_star,
        s_star_posterior: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CausalSceneGraph, Dims, SceneMeta, SceneObject, SpatialRelation::*};
    use crate::layout::{place_graph, SvgRenderer};
    use crate::oracle::{DeterministicOracle, GroundTruth};

    #[test]
    fn candidates_exclude_current() {
        for r in SpatialRelation::ALL {
            let s = candidate_states(&CausalEdge::new("a", r, "b"));
            assert_eq!(s.len(), 14);
            assert!(!s.contains(&r));
        }
    }

    fn dist(pairs: &[(SpatialRelation, f64)]) -> StateDistribution {
        pairs.iter().copied().collect()
    }

    #[test]
    fn selection() {
        let (s, p, _) = select_state(&[(Above, dist(&[(On, 1.0)])), (Left, dist(&[(On, 1.0)]))]).unwrap();
        assert_eq!((s, p), (On, 1.0));

        let results = vec![(Above, dist(&[(On, 0.6), (Above, 0.4)])); 14];
        let (s, p, _) = select_state(&results).unwrap();
        assert_eq!(s, On);
        assert!((p - 8.4 / 14.0).abs() < 1e-12);

        let (s, _, _) = select_state(&[(On, dist(&[(Right, 0.5), (Left, 0.5)]))]).unwrap();
        assert_eq!(s, Left);
        assert!(select_state(&[]).is_err());
    }

    #[test]
    fn deterministic_votes_for_truth() {
        let o = |id: &str, l: f64, h: f64| SceneObject::new(id, id, Dims::new(l, l, h)).unwrap();
        let g = CausalSceneGraph::new(
            [o("cup", 8.0, 10.0), o("table", 120.0, 75.0)],
            vec![CausalEdge::new("cup", Under, "table")],
            SceneMeta::default(),
        )
        .unwrap();
        let scene = place_graph(&g).unwrap();
        let oracle = DeterministicOracle::new(GroundTruth::default().with_relation("cup", On, "table"));
        let edge = &g.edges()[0];
        let r = state_probability(edge, Left, &scene, &SvgRenderer::default(), &oracle, 5, &LayoutOptions::default())
            .unwrap();
        assert_eq!(r, dist(&[(On, 1.0)]));
        let res = intervene(edge, &scene, &SvgRenderer::default(), &oracle, 5, &LayoutOptions::default()).unwrap();
        assert_eq!(res.s_star, On);
        assert_eq!(res.s_star_posterior, 1.0);
    }
}
