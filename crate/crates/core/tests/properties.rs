mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use causalstruct::bayes::{decide, posterior, Outcome};
use causalstruct::graph::{
    topological_order, CausalEdge, CausalSceneGraph, EdgeStatus, ObjectId, SceneMeta, SceneObject, SpatialRelation,
};
use causalstruct::intervention::{select_state, state_probability, StateDistribution};
use causalstruct::layout::{
    place_graph, render_view, LayoutOptions, LayoutScene, RenderedView, SvgRenderer, Viewpoint,
};
use causalstruct::oracle::{AxisScores, DeterministicOracle, InterventionJudgment, Oracle, PrecedenceEstimate};
use causalstruct::order::{apply_size_rule, complete_edges, enforce_dag, order_edge, order_graph};
use causalstruct::pid::{actuate, run_loop, AttributeKind, AttributeTarget, PidController, PidParams};
use causalstruct::pipeline::run_pipeline;
use causalstruct::config::PipelineConfig;
use causalstruct::{Error, Result};

use common::*;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(64)
    }
}

/// Kahn's algorithm, independent of the library.
fn has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, t) in edges {
        indeg[t] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &(s, t) in edges {
            if s == v {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.push(t);
                }
            }
        }
    }
    seen < n
}

fn nodes(n: usize) -> Vec<SceneObject> {
    (0..n).map(|i| obj(&format!("o{i}"), 10.0 + i as f64, 10.0, 10.0)).collect()
}

fn raw_graph(n: usize, pairs: &[(usize, usize)]) -> CausalSceneGraph {
    let edges = pairs
        .iter()
        .map(|&(s, t)| CausalEdge::new(format!("o{s}"), SpatialRelation::On, format!("o{t}")))
        .collect();
    CausalSceneGraph::new(nodes(n), edges, SceneMeta::default()).unwrap()
}

fn edge_pairs(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..max_n).prop_flat_map(|n| {
        let pair = (0..n, 0..n).prop_filter("no self loops", |(a, b)| a != b);
        (Just(n), prop::collection::vec(pair, 0..2 * n))
    })
}

fn dedup_pairs(pairs: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut seen = BTreeSet::new();
    pairs
        .into_iter()
        .filter(|&(a, b)| seen.insert((a.min(b), a.max(b))))
        .collect()
}

fn forest_case() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 2usize..7)
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn topo_order_exists_iff_acyclic((n, pairs) in edge_pairs(7)) {
        let pairs = dedup_pairs(pairs);
        let g = raw_graph(n, &pairs);
        // subject depends on target, so targets come first
        let flipped: Vec<(usize, usize)> = pairs.iter().map(|&(s, t)| (t, s)).collect();
        match topological_order(&g) {
            Ok(order) => {
                prop_assert!(!has_cycle(n, &flipped));
                prop_assert_eq!(order.len(), n);
                let pos: BTreeMap<&ObjectId, usize> = order.iter().enumerate().map(|(i, id)| (id, i)).collect();
                for e in g.edges() {
                    prop_assert!(pos[&e.target] < pos[&e.subject]);
                }
            }
            Err(Error::CycleDetected(_)) => prop_assert!(has_cycle(n, &flipped)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn deterministic_oracle_is_pure_and_in_range((seed, n) in forest_case(), k in 1usize..9) {
        let (ns, triples) = forest(seed, n, 0.8);
        let g = graph(ns.clone(), &triples, EdgeStatus::Proposed);
        let oracle = DeterministicOracle::new(truth(&triples, &g));
        for e in g.edges() {
            for r in [e.relation, SpatialRelation::Left] {
                let e = CausalEdge { relation: r, ..e.clone() };
                let f = oracle.edge_trials(&e, k).unwrap();
                prop_assert!((0.0..=1.0).contains(&f));
                let count = f * k as f64;
                prop_assert!((count - count.round()).abs() < 1e-9);
                prop_assert_eq!(f, oracle.edge_trials(&e, k).unwrap());
                let p = oracle.edge_prior(&e).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert_eq!(p, oracle.edge_prior(&e).unwrap());
            }
        }
        for a in &ns {
            for b in &ns {
                if a.id != b.id {
                    let p = oracle.precedence(a, b).unwrap();
                    prop_assert!((0.0..=1.0).contains(&p.c_ij) && (0.0..=1.0).contains(&p.c_ji));
                    prop_assert_eq!(p, oracle.precedence(a, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn ordering_yields_a_dag((seed, n) in forest_case(), flips in prop::collection::vec(any::<bool>(), 8)) {
        let (ns, triples) = forest(seed, n, 0.9);
        // the oracle knows the truth, the graph proposes some edges backwards
        let proposed: Vec<Triple> = triples
            .iter()
            .zip(flips.iter().cycle())
            .map(|((s, r, t), f)| if *f { (t.clone(), *r, s.clone()) } else { (s.clone(), *r, t.clone()) })
            .collect();
        let g = graph(ns, &proposed, EdgeStatus::Proposed);
        let oracle = DeterministicOracle::new(truth(&triples, &g));
        let ordered = enforce_dag(&order_graph(&g, &oracle).unwrap()).unwrap();
        let order = topological_order(&ordered).unwrap();
        prop_assert_eq!(order.len(), n);
        for e in ordered.active_edges() {
            prop_assert!(triples.iter().any(|(s, _, t)| s == &e.subject && t == &e.target));
        }
    }

    #[test]
    fn order_edge_is_idempotent((seed, n) in forest_case(), flip in any::<bool>()) {
        let (ns, triples) = forest(seed, n, 1.0);
        let g = graph(ns, &triples, EdgeStatus::Proposed);
        let oracle = DeterministicOracle::new(truth(&triples, &g));
        for e in g.edges() {
            let e = if flip {
                CausalEdge::new(e.target.clone(), e.relation, e.subject.clone())
            } else {
                e.clone()
            };
            let once = order_edge(&e, g.nodes(), &oracle).unwrap();
            let twice = order_edge(&once, g.nodes(), &oracle).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn size_rule_keeps_the_pair((seed, n) in forest_case()) {
        let (ns, triples) = forest(seed, n, 1.0);
        let g = graph(ns, &triples, EdgeStatus::Proposed);
        for e in g.edges() {
            let out = apply_size_rule(e, g.nodes()).unwrap();
            let before: BTreeSet<&ObjectId> = [&e.subject, &e.target].into();
            let after: BTreeSet<&ObjectId> = [&out.subject, &out.target].into();
            prop_assert_eq!(before, after);
            let s = g.nodes()[&out.subject].volume_cm3();
            let t = g.nodes()[&out.target].volume_cm3();
            prop_assert!(s <= t);
        }
    }

    #[test]
    fn completion_only_adds((seed, n) in forest_case()) {
        let (ns, triples) = forest(seed, n, 0.5);
        // truth connects everything to o0, the graph only has the forest
        let mut full = triples.clone();
        for node in &ns {
            if node.id.as_str() != "o0" && !triples.iter().any(|(s, _, _)| s == &node.id) {
                full.push((node.id.clone(), SpatialRelation::Left, ObjectId::new("o0")));
            }
        }
        let g = graph(ns, &triples, EdgeStatus::Kept);
        let oracle = DeterministicOracle::new(truth(&full, &g));
        let done = complete_edges(&g, &oracle).unwrap();
        prop_assert!(done.edges().len() >= g.edges().len());
        for (a, b) in g.edges().iter().zip(done.edges()) {
            prop_assert_eq!(a, b);
        }
        prop_assert!(done.isolated_nodes().is_empty());
    }

    #[test]
    fn posterior_rises_with_prior(a in 0.0f64..=1.0, b in 0.0f64..=1.0, l1 in 1e-6f64..1.0, l0 in 1e-6f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(posterior(lo, l1, l0) <= posterior(hi, l1, l0));
    }

    #[test]
    fn posterior_stays_open(prior in 0.01f64..=0.99, fs in prop::collection::vec(0.0f64..=1.0, 1..5)) {
        let all: Vec<CausalEdge> = (0..fs.len())
            .map(|i| CausalEdge::new(format!("s{i}"), SpatialRelation::On, format!("t{i}")).with_prior(prior))
            .collect();
        let oracle = FixedTrials(fs);
        for e in &all {
            let p = causalstruct::bayes::edge_posterior(e, &all, &oracle, 5).unwrap();
            prop_assert!(p > 0.0 && p < 1.0, "{p}");
        }
    }

    #[test]
    fn decide_is_a_trichotomy(p in 0.0f64..=1.0, q in 0.0f64..=1.0, s in 0usize..15, t1 in 0.05f64..0.95, t2 in 0.05f64..0.95) {
        let s = SpatialRelation::ALL[s];
        let out = decide(p, Some((s, q)), t1, t2).unwrap();
        let expected = if p > t1 {
            Outcome::Kept
        } else if q > t2 {
            Outcome::Modified(s)
        } else {
            Outcome::Removed
        };
        prop_assert_eq!(out, expected);
        prop_assert_eq!(decide(p, None, t1, t2).is_some(), p > t1);
    }

    #[test]
    fn select_state_ignores_result_order(
        dists in prop::collection::vec(prop::collection::btree_map(0usize..15, 0.0f64..=1.0, 0..4), 1..6),
        seed in any::<u64>(),
    ) {
        let results: Vec<(SpatialRelation, StateDistribution)> = dists
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                // vote shares on a 1/8 grid keep the sums exact in any order
                let d = d.into_iter().map(|(s, p)| (SpatialRelation::ALL[s], (p * 8.0).round() / 8.0)).collect();
                (SpatialRelation::ALL[i], d)
            })
            .collect();
        let mut shuffled = results.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng(seed));
        let a = select_state(&results).unwrap();
        let b = select_state(&shuffled).unwrap();
        prop_assert_eq!(a.0, b.0);
        prop_assert_eq!(a.1, b.1);
        prop_assert!((0.0..=1.0).contains(&a.1));
    }

    #[test]
    fn malformed_answers_leave_a_deficit(k in 1usize..10, mask in any::<u16>()) {
        let nodes = vec![obj("table", 120.0, 60.0, 75.0), obj("cup", 8.0, 8.0, 10.0)];
        let triples = vec![(ObjectId::new("cup"), SpatialRelation::On, ObjectId::new("table"))];
        let g = graph(nodes, &triples, EdgeStatus::Kept);
        let scene = place_graph(&g).unwrap();
        let oracle = Flaky { inner: DeterministicOracle::new(truth(&triples, &g)), mask };
        let bad = (0..k).filter(|t| mask >> t & 1 == 1).count();
        let edge = g.edges()[0].clone();
        let dist = state_probability(
            &edge,
            SpatialRelation::Left,
            &scene,
            &SvgRenderer::default(),
            &oracle,
            k,
            &LayoutOptions::default(),
        )
        .unwrap();
        let total: f64 = dist.values().sum();
        prop_assert!((1.0 - total - bad as f64 / k as f64).abs() < 1e-12);
    }

    #[test]
    fn actuator_is_odd_bounded_and_monotone(u in -1e6f64..1e6, v in -1e6f64..1e6, delta in 1e-3f64..1.0, gamma in 1.0f64..1e3) {
        let g = actuate(u, delta, gamma);
        prop_assert_eq!(actuate(-u, delta, gamma), -g);
        prop_assert!(g.abs() < delta);
        if u != 0.0 {
            prop_assert_eq!(g.signum(), u.signum());
        }
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        prop_assert!(actuate(lo, delta, gamma) <= actuate(hi, delta, gamma));
    }

    #[test]
    fn actuator_strict_before_saturation(a in -5.0f64..5.0, b in -5.0f64..5.0, gamma in 1.0f64..1e3) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(actuate(lo * gamma, 0.4, gamma) < actuate(hi * gamma, 0.4, gamma));
    }

    #[test]
    fn proportional_only_signal(kp in 0.01f64..10.0, es in prop::collection::vec(-100.0f64..100.0, 1..20)) {
        let mut c = PidController::new(PidParams { kp, ki: 0.0, kd: 0.0, ..PidParams::SCALE }).unwrap();
        for e in es {
            prop_assert_eq!(c.signal(e), kp * e);
        }
    }

    #[test]
    fn loop_respects_its_budget(n in 1usize..30, scores in prop::collection::vec(-100.0f64..100.0, 1..40)) {
        let params = PidParams { max_iters: n, ..PidParams::POSITION };
        let mut c = PidController::new(params).unwrap();
        let mut i = 0;
        let (_, trace) = run_loop(
            AttributeTarget::new("x", AttributeKind::PositionX),
            &mut c,
            0.0,
            |_| {
                i += 1;
                Ok(scores[(i - 1) % scores.len()])
            },
            |v, g| v + g,
        )
        .map_err(|a| a.error)
        .unwrap();
        prop_assert!(trace.updates() <= n);
        prop_assert!(trace.rows.len() <= n + 1);
        prop_assert_eq!(trace.rows.len(), trace.updates() + 1);
    }

    #[test]
    fn placement_ignores_edge_order((seed, n) in forest_case(), rot in 0usize..8) {
        let (ns, triples) = forest(seed, n, 0.8);
        let g = graph(ns.clone(), &triples, EdgeStatus::Kept);
        let mut rotated = triples.clone();
        if !rotated.is_empty() {
            let k = rot % rotated.len();
            rotated.rotate_left(k);
        }
        let h = graph(ns, &rotated, EdgeStatus::Kept);
        match (place_graph(&g), place_graph(&h)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "placement succeeded for only one edge order"),
        }
    }

    #[test]
    fn rendering_is_pure((seed, n) in forest_case(), view in 0usize..4) {
        let (ns, triples) = forest(seed, n, 0.8);
        let g = graph(ns, &triples, EdgeStatus::Kept);
        let Ok(scene) = place_graph(&g) else { return Ok(()) };
        let v = Viewpoint::ALL[view];
        let before = scene.clone();
        let a = render_view(&scene, v, (256, 256)).unwrap();
        let b = render_view(&scene, v, (256, 256)).unwrap();
        prop_assert_eq!(&scene, &before);
        prop_assert_eq!(a.document, b.document);
    }

    #[test]
    fn pipeline_output_is_a_valid_layout((seed, n) in forest_case()) {
        // a tree, so no object needs completing
        let (ns, triples) = forest(seed, n, 1.0);
        let text = prompt(&ns, &triples);
        let config = PipelineConfig::default();
        let g = causalstruct::grammar::parse_prompt(&text).unwrap();
        let oracle = DeterministicOracle::new(g.truth).with_gap(config.layout.gap);
        match run_pipeline(&config, &text, &oracle) {
            Ok(a) => {
                prop_assert!(a.scene.violations().is_empty(), "{:?}", a.scene.violations());
                prop_assert!(topological_order(&a.graph).is_ok());
            }
            Err(e) => prop_assert!(matches!(e.error, Error::DoesNotFit { .. }), "{e}"),
        }
    }
}

/// Answers trial queries with a fixed fraction per edge index, read from
/// the subject id `s<i>`.
struct FixedTrials(Vec<f64>);

fn no<T>() -> Result<T> {
    Err(Error::Precondition("not used".into()))
}

impl Oracle for FixedTrials {
    fn propose_graph(&self, _: &str) -> Result<CausalSceneGraph> {
        no()
    }
    fn precedence(&self, _: &SceneObject, _: &SceneObject) -> Result<PrecedenceEstimate> {
        no()
    }
    fn edge_prior(&self, _: &CausalEdge) -> Result<f64> {
        no()
    }
    fn edge_trials(&self, edge: &CausalEdge, _: usize) -> Result<f64> {
        let i: usize = edge.subject.as_str()[1..].parse().unwrap();
        Ok(self.0[i])
    }
    fn intervention_judgment(&self, _: &CausalEdge, _: &RenderedView, _: usize) -> Result<InterventionJudgment> {
        no()
    }
    fn scale_score(&self, _: &CausalEdge, _: &RenderedView, _: &LayoutScene) -> Result<i32> {
        no()
    }
    fn position_scores(&self, _: &CausalEdge, _: &RenderedView, _: &LayoutScene) -> Result<AxisScores> {
        no()
    }
    fn complete_edge(&self, _: &CausalSceneGraph, _: &ObjectId) -> Result<Option<CausalEdge>> {
        no()
    }
}

/// Deterministic oracle whose judgment trials fail as malformed where the
/// mask bit is set.
struct Flaky {
    inner: DeterministicOracle,
    mask: u16,
}

impl Oracle for Flaky {
    fn propose_graph(&self, p: &str) -> Result<CausalSceneGraph> {
        self.inner.propose_graph(p)
    }
    fn precedence(&self, a: &SceneObject, b: &SceneObject) -> Result<PrecedenceEstimate> {
        self.inner.precedence(a, b)
    }
    fn edge_prior(&self, e: &CausalEdge) -> Result<f64> {
        self.inner.edge_prior(e)
    }
    fn edge_trials(&self, e: &CausalEdge, k: usize) -> Result<f64> {
        self.inner.edge_trials(e, k)
    }
    fn intervention_judgment(&self, e: &CausalEdge, image: &RenderedView, trial: usize) -> Result<InterventionJudgment> {
        if self.mask >> trial & 1 == 1 {
            return Err(Error::MalformedResponse("garbled".into()));
        }
        self.inner.intervention_judgment(e, image, trial)
    }
    fn scale_score(&self, e: &CausalEdge, image: &RenderedView, s: &LayoutScene) -> Result<i32> {
        self.inner.scale_score(e, image, s)
    }
    fn position_scores(&self, e: &CausalEdge, image: &RenderedView, s: &LayoutScene) -> Result<AxisScores> {
        self.inner.position_scores(e, image, s)
    }
    fn complete_edge(&self, g: &CausalSceneGraph, id: &ObjectId) -> Result<Option<CausalEdge>> {
        self.inner.complete_edge(g, id)
    }
}
