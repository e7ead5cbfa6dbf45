//! Edge posteriors from priors and trial votes, and the keep / modify /
//! remove update.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{CausalEdge, CausalSceneGraph, EdgeStatus, SpatialRelation};
use crate::oracle::Oracle;

/// Smallest trial fraction allowed into a likelihood product.
pub const LIKELIHOOD_FLOOR: f64 = 1e-3;

pub const DEFAULT_TAU1: f64 = 0.7;
pub const DEFAULT_TAU2: f64 = 0.5;
pub const DEFAULT_TRIALS: usize = 5;

pub fn floor_fraction(f: f64) -> f64 {
    f.max(LIKELIHOOD_FLOOR)
}

/// Product of floored fractions.
pub fn likelihood_product(fractions: &[f64]) -> f64 {
    fractions.iter().map(|f| floor_fraction(*f)).product()
}

/// Bayes' rule with the two hypotheses "edge correct" (likelihood `l1`) and
/// "edge incorrect" (`l0`). Degenerate evidence leaves the prior.
pub fn posterior(prior: f64, l1: f64, l0: f64) -> f64 {
    let num = l1 * prior;
    let den = num + l0 * (1.0 - prior);
    if den > 0.0 && den.is_finite() {
        (num / den).clamp(0.0, 1.0)
    } else {
        prior
    }
}

/// Trial fraction for every edge in `order_edges`, queried in order.
pub fn trial_fractions(order_edges: &[CausalEdge], oracle: &dyn Oracle, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Precondition("trial count must be at least 1".into()));
    }
    order_edges.iter().map(|e| oracle.edge_trials(e, k)).collect()
}

pub fn order_likelihood(order_edges: &[CausalEdge], oracle: &dyn Oracle, k: usize) -> Result<f64> {
    if order_edges.is_empty() {
        return Err(Error::Precondition("order edge set is empty".into()));
    }
    Ok(likelihood_product(&trial_fractions(order_edges, oracle, k)?))
}

fn same_edge(a: &CausalEdge, b: &CausalEdge) -> bool {
    a.subject == b.subject && a.target == b.target && a.relation == b.relation
}

/// The two likelihoods for edge `i` given all fractions: the plain product,
/// and the product with edge `i`'s fraction complemented.
pub fn hypothesis_likelihoods(fractions: &[f64], i: usize) -> (f64, f64) {
    let l1 = likelihood_product(fractions);
    let mut alt = fractions.to_vec();
    alt[i] = 1.0 - alt[i];
    (l1, likelihood_product(&alt))
}

/// Posterior of `edge` against the order edges. If `edge` is not among
/// them it joins the product.
pub fn edge_posterior(
    edge: &CausalEdge,
    order_edges: &[CausalEdge],
    oracle: &dyn Oracle,
    k: usize,
) -> Result<f64> {
    let mut set = order_edges.to_vec();
    let i = match set.iter().position(|e| same_edge(e, edge)) {
        Some(i) => i,
        None => {
            set.push(edge.clone());
            set.len() - 1
        }
    };
    let fractions = trial_fractions(&set, oracle, k)?;
    let (l1, l0) = hypothesis_likelihoods(&fractions, i);
    Ok(posterior(edge.prior, l1, l0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Intervene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAssessment {
    /// Position of the edge in the graph's edge list.
    pub index: usize,
    pub edge: CausalEdge,
    pub prior: f64,
    pub fraction: f64,
    pub likelihood: f64,
    pub alt_likelihood: f64,
    pub posterior: f64,
    pub decision: Decision,
}

/// Assesses every active edge of `graph` against the whole active edge set.
/// Trials are run once per edge and shared.
pub fn assess_edges(
    graph: &CausalSceneGraph,
    oracle: &dyn Oracle,
    k: usize,
    tau1: f64,
) -> Result<Vec<EdgeAssessment>> {
    check_threshold("tau1", tau1)?;
    let active: Vec<(usize, &CausalEdge)> =
        graph.edges().iter().enumerate().filter(|(_, e)| e.is_active()).collect();
    if active.is_empty() {
        return Ok(Vec::new());
    }
    let set: Vec<CausalEdge> = active.iter().map(|(_, e)| (*e).clone()).collect();
    let fractions = trial_fractions(&set, oracle, k)?;
    Ok(active
        .iter()
        .enumerate()
        .map(|(j, (index, edge))| {
            let (l1, l0) = hypothesis_likelihoods(&fractions, j);
            let post = posterior(edge.prior, l1, l0);
            EdgeAssessment {
                index: *index,
                edge: (*edge).clone(),
                prior: edge.prior,
                fraction: fractions[j],
                likelihood: l1,
                alt_likelihood: l0,
                posterior: post,
                decision: if post > tau1 { Decision::Keep } else { Decision::Intervene },
            }
        })
        .collect())
}

fn check_threshold(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} must lie in (0, 1), got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Kept,
    Modified(SpatialRelation),
    Removed,
}

/// The three-way rule for one edge. `replacement` is the selected state and
/// its probability, needed only when the posterior is at or below `tau1`.
pub fn decide(
    posterior: f64,
    replacement: Option<(SpatialRelation, f64)>,
    tau1: f64,
    tau2: f64,
) -> Option<Outcome> {
    if posterior > tau1 {
        return Some(Outcome::Kept);
    }
    let (s, p) = replacement?;
    Some(if p > tau2 { Outcome::Modified(s) } else { Outcome::Removed })
}

/// Applies the assessments to `graph`. `interventions` maps an edge index to
/// the selected replacement relation and its probability.
pub fn update_strategy(
    graph: &CausalSceneGraph,
    assessments: &[EdgeAssessment],
    tau1: f64,
    tau2: f64,
    interventions: &BTreeMap<usize, (SpatialRelation, f64)>,
) -> Result<CausalSceneGraph> {
    check_threshold("tau1", tau1)?;
    check_threshold("tau2", tau2)?;
    let mut edges = graph.edges().to_vec();
    for a in assessments {
        let edge = edges
            .get_mut(a.index)
            .ok_or_else(|| Error::Precondition(format!("no edge #{}", a.index)))?;
        let outcome = decide(a.posterior, interventions.get(&a.index).copied(), tau1, tau2)
            .ok_or(Error::MissingIntervention(a.index))?;
        match outcome {
            Outcome::Kept => {
                edge.status = EdgeStatus::Kept;
                edge.posterior = Some(a.posterior);
            }
            Outcome::Modified(s) => {
                edge.relation = s;
                edge.status = EdgeStatus::Modified;
                edge.posterior = interventions.get(&a.index).map(|(_, p)| *p);
            }
            Outcome::Removed => {
                edge.status = EdgeStatus::Removed;
                edge.posterior = Some(a.posterior);
            }
        }
    }
    graph.with_edges(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Dims, SceneMeta, SceneObject, SpatialRelation::*};
    use crate::oracle::{DeterministicOracle, GroundTruth};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn products() {
        assert!(close(likelihood_product(&[0.9, 0.8]), 0.72));
        assert_eq!(likelihood_product(&[1.0, 1.0]), 1.0);
        assert!(close(likelihood_product(&[1.0, 0.0]), 1e-3));
    }

    #[test]
    fn posteriors() {
        assert!(close(posterior(0.5, 0.3, 0.3), 0.5));
        assert!(close(posterior(0.5, 0.9, 0.1), 0.45 / 0.5));
        assert!(close(posterior(0.2, 0.9, 0.1), 0.18 / 0.26));
        assert_eq!(posterior(0.3, 0.0, 0.0), 0.3);
    }

    #[test]
    fn branches() {
        assert_eq!(decide(0.95, None, 0.7, 0.5), Some(Outcome::Kept));
        assert_eq!(decide(0.4, Some((On, 0.8)), 0.7, 0.5), Some(Outcome::Modified(On)));
        assert_eq!(decide(0.4, Some((On, 0.3)), 0.7, 0.5), Some(Outcome::Removed));
        assert_eq!(decide(0.7, None, 0.7, 0.5), None);
    }

    fn two_edge_graph() -> CausalSceneGraph {
        let o = |id: &str| SceneObject::new(id, id, Dims::new(10.0, 10.0, 10.0)).unwrap();
        CausalSceneGraph::new(
            [o("cup"), o("table"), o("mouse")],
            vec![
                CausalEdge::new("cup", Under, "table").with_prior(0.5),
                CausalEdge::new("mouse", Right, "table").with_prior(0.9),
            ],
            SceneMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn assessment_and_update() {
        let g = two_edge_graph();
        let oracle = DeterministicOracle::new(
            GroundTruth::default()
                .with_relation("cup", On, "table")
                .with_relation("mouse", Right, "table"),
        );
        let a = assess_edges(&g, &oracle, 5, 0.7).unwrap();
        assert_eq!(a.len(), 2);
        // fractions 0 and 1: the cup edge is floored on the affirmative side
        assert!(close(a[0].posterior, 0.5 * 1e-3 / (0.5 * 1e-3 + 0.5)));
        assert_eq!(a[0].decision, Decision::Intervene);
        assert!(close(a[1].posterior, 0.9 / (0.9 + 1e-3 * 0.1)));
        assert_eq!(a[1].decision, Decision::Keep);
        let direct = edge_posterior(&g.edges()[0], g.edges(), &oracle, 5).unwrap();
        assert!(close(direct, a[0].posterior));

        assert!(matches!(
            update_strategy(&g, &a, 0.7, 0.5, &BTreeMap::new()),
            Err(Error::MissingIntervention(0))
        ));
        let fixed = update_strategy(&g, &a, 0.7, 0.5, &BTreeMap::from([(0, (On, 1.0))])).unwrap();
        assert_eq!(fixed.edges()[0].to_string(), "[cup, on, table]");
        assert_eq!(fixed.edges()[0].status, EdgeStatus::Modified);
        assert_eq!(fixed.edges()[1].status, EdgeStatus::Kept);
        let dropped = update_strategy(&g, &a, 0.7, 0.5, &BTreeMap::from([(0, (On, 0.2))])).unwrap();
        assert_eq!(dropped.edges()[0].status, EdgeStatus::Removed);
        assert!(update_strategy(&g, &a, 1.0, 0.5, &BTreeMap::new()).is_err());
    }
}
