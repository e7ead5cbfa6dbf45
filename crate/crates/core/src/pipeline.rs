//! End-to-end run: prompt to graph, edge screening, placement, PID
//! correction, overlap resolution and export.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::bayes::{assess_edges, update_strategy, Decision, EdgeAssessment};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::grammar::parse_prompt;
use crate::graph::{encode_scene, CausalSceneGraph, EdgeStatus};
use crate::intervention::{intervene, InterventionResult};
use crate::layout::{
    assemble_fscene, encode_fscene, place_graph_with, resolve_overlaps, FScene, LayoutScene, Placement,
    RenderedView, Renderer, SvgRenderer, Viewpoint,
};
use crate::oracle::{Backend, DeterministicOracle, GroundTruth, Oracle, RemoteOracle, UreqTransport};
use crate::order::{assign_priors, complete_edges, enforce_dag, order_graph};
use crate::pid::{refine_edge_attributes, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Parse,
    Order,
    Complete,
    Priors,
    Dag,
    Posterior,
    Intervene,
    Update,
    Place,
    Refine,
    Resolve,
    Export,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Order => "order",
            Stage::Complete => "complete",
            Stage::Priors => "priors",
            Stage::Dag => "dag",
            Stage::Posterior => "posterior",
            Stage::Intervene => "intervene",
            Stage::Update => "update",
            Stage::Place => "place",
            Stage::Refine => "refine",
            Stage::Resolve => "resolve",
            Stage::Export => "export",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A failed run: the stage it stopped in, and the graph and PID traces as
/// they stood.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub error: Error,
    pub graph: Option<CausalSceneGraph>,
    pub traces: Vec<Trace>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub graph: CausalSceneGraph,
    pub scene: LayoutScene,
    pub fscene: FScene,
    pub renders: Vec<RenderedView>,
    pub traces: Vec<Trace>,
    pub assessments: Vec<EdgeAssessment>,
    pub interventions: Vec<InterventionResult>,
}

/// Truth table that affirms a graph as it stands: its active edges and
/// current scales.
pub fn truth_from_graph(graph: &CausalSceneGraph) -> GroundTruth {
    let mut t = GroundTruth::default();
    for e in graph.active_edges() {
        t.true_relations
            .insert((e.subject.clone(), e.target.clone()), e.relation);
    }
    for n in graph.nodes().values() {
        t.true_scales.insert(n.id.clone(), n.scale);
    }
    t.with_defaults_for(graph.nodes().keys())
}

/// Builds the configured oracle. A deterministic backend without an
/// explicit truth table takes it from the structured prompt, or failing
/// that from `graph`.
pub fn make_oracle(
    config: &PipelineConfig,
    prompt: Option<&str>,
    graph: Option<&CausalSceneGraph>,
) -> Result<Box<dyn Oracle>> {
    match &config.oracle.backend {
        Backend::Deterministic { truth } => {
            let truth = match (truth, prompt, graph) {
                (Some(t), _, _) => t.clone(),
                (None, Some(p), _) => parse_prompt(p)?.truth,
                (None, None, Some(g)) => truth_from_graph(g),
                (None, None, None) => GroundTruth::default(),
            };
            Ok(Box::new(DeterministicOracle::new(truth).with_gap(config.layout.gap)))
        }
        Backend::Remote(r) => Ok(Box::new(RemoteOracle::new(
            r.clone(),
            config.oracle.cache_dir.clone(),
            config.oracle.seed,
            Arc::new(UreqTransport),
        )?)),
    }
}

pub fn build_initial_graph(prompt: &str, oracle: &dyn Oracle) -> Result<CausalSceneGraph> {
    if prompt.trim().is_empty() {
        return Err(Error::Grammar("empty prompt".into()));
    }
    oracle.propose_graph(prompt)
}

struct Run<'a> {
    config: &'a PipelineConfig,
    oracle: &'a dyn Oracle,
    renderer: SvgRenderer,
    graph: Option<CausalSceneGraph>,
    traces: Vec<Trace>,
}

impl Run<'_> {
    fn fail(&mut self, stage: Stage, error: Error) -> PipelineError {
        PipelineError {
            stage,
            error,
            graph: self.graph.take(),
            traces: std::mem::take(&mut self.traces),
        }
    }

    fn step(
        &mut self,
        stage: Stage,
        f: impl FnOnce(&CausalSceneGraph, &dyn Oracle) -> Result<CausalSceneGraph>,
    ) -> std::result::Result<(), PipelineError> {
        let current = self.graph.as_ref().expect("graph is set before stages run");
        let next = f(current, self.oracle);
        match next {
            Ok(g) => {
                self.graph = Some(g);
                Ok(())
            }
            Err(e) => Err(self.fail(stage, e)),
        }
    }

    fn screen(&mut self) -> std::result::Result<(Vec<EdgeAssessment>, Vec<InterventionResult>), PipelineError> {
        let cfg = self.config;
        self.step(Stage::Order, order_graph)?;
        self.step(Stage::Complete, |g, o| order_graph(&complete_edges(g, o)?, o))?;
        self.step(Stage::Priors, assign_priors)?;
        self.step(Stage::Dag, |g, _| enforce_dag(g))?;

        let graph = self.graph.clone().expect("set");
        let assessments = assess_edges(&graph, self.oracle, cfg.oracle.trials_k, cfg.tau1)
            .map_err(|e| self.fail(Stage::Posterior, e))?;

        let mut interventions = Vec::new();
        let mut chosen = BTreeMap::new();
        if assessments.iter().any(|a| a.decision == Decision::Intervene) {
            let base = place_graph_with(&graph, &cfg.layout, Placement::Lenient).map_err(|e| self.fail(Stage::Intervene, e))?;
            for a in assessments.iter().filter(|a| a.decision == Decision::Intervene) {
                let r = intervene(&a.edge, &base, &self.renderer, self.oracle, cfg.oracle.trials_k, &cfg.layout)
                    .map_err(|e| self.fail(Stage::Intervene, e))?;
                chosen.insert(a.index, (r.s_star, r.s_star_posterior));
                interventions.push(r);
            }
        }
        let updated = update_strategy(&graph, &assessments, cfg.tau1, cfg.tau2, &chosen)
            .map_err(|e| self.fail(Stage::Update, e))?;
        self.graph = Some(updated);
        Ok((assessments, interventions))
    }

    fn realize(&mut self) -> std::result::Result<(LayoutScene, CausalSceneGraph), PipelineError> {
        let cfg = self.config;
        let graph = self.graph.clone().expect("set");
        let mut scene = place_graph_with(&graph, &cfg.layout, Placement::Strict).map_err(|e| self.fail(Stage::Place, e))?;

        let order = scene.order().to_vec();
        for id in &order {
            let Some(anchor) = scene.get(id).ok().and_then(|o| o.anchor.clone()) else {
                continue;
            };
            let Some(edge) = graph.active_edges().find(|e| {
                &e.subject == id
                    && e.target == anchor.target
                    && matches!(e.status, EdgeStatus::Kept | EdgeStatus::Modified)
            }) else {
                continue;
            };
            match refine_edge_attributes(
                edge,
                &scene,
                &self.renderer,
                self.oracle,
                &cfg.pid,
                &cfg.layout,
                &mut self.traces,
            ) {
                Ok(s) => scene = s,
                Err(e) => return Err(self.fail(Stage::Refine, e)),
            }
        }

        let mut scene = resolve_overlaps(&scene);
        let violations = scene.violations();
        scene.diagnostics.extend(violations);
        let final_graph = scene.write_back(&graph).map_err(|e| self.fail(Stage::Export, e))?;
        self.graph = Some(final_graph.clone());
        Ok((scene, final_graph))
    }

    fn export(
        &mut self,
        scene: LayoutScene,
        graph: CausalSceneGraph,
        assessments: Vec<EdgeAssessment>,
        interventions: Vec<InterventionResult>,
    ) -> std::result::Result<Artifacts, PipelineError> {
        let mut renders = Vec::new();
        for v in Viewpoint::ALL {
            renders.push(self.renderer.render(&scene, v).map_err(|e| self.fail(Stage::Export, e))?);
        }
        Ok(Artifacts {
            fscene: assemble_fscene(&scene),
            graph,
            scene,
            renders,
            traces: std::mem::take(&mut self.traces),
            assessments,
            interventions,
        })
    }
}

/// The full pipeline from a prompt.
pub fn run_pipeline(
    config: &PipelineConfig,
    prompt: &str,
    oracle: &dyn Oracle,
) -> std::result::Result<Artifacts, PipelineError> {
    let mut run = Run {
        config,
        oracle,
        renderer: SvgRenderer::default(),
        graph: None,
        traces: Vec::new(),
    };
    let graph = build_initial_graph(prompt, oracle).map_err(|e| run.fail(Stage::Parse, e))?;
    run.graph = Some(graph);
    let (assessments, interventions) = run.screen()?;
    let (scene, graph) = run.realize()?;
    run.export(scene, graph, assessments, interventions)
}

/// Screens and lays out an existing graph. Every active edge goes back to
/// Proposed first.
pub fn refine_graph(
    config: &PipelineConfig,
    graph: &CausalSceneGraph,
    oracle: &dyn Oracle,
) -> std::result::Result<Artifacts, PipelineError> {
    let mut edges = graph.edges().to_vec();
    for e in edges.iter_mut().filter(|e| e.is_active()) {
        e.status = EdgeStatus::Proposed;
        e.posterior = None;
    }
    let mut run = Run {
        config,
        oracle,
        renderer: SvgRenderer::default(),
        graph: Some(graph.clone()),
        traces: Vec::new(),
    };
    let reset = graph.with_edges(edges).map_err(|e| run.fail(Stage::Parse, e))?;
    run.graph = Some(reset);
    let (assessments, interventions) = run.screen()?;
    let (scene, graph) = run.realize()?;
    run.export(scene, graph, assessments, interventions)
}

/// Places a graph as it stands, correcting only Kept and Modified edges.
pub fn layout_graph(
    config: &PipelineConfig,
    graph: &CausalSceneGraph,
    oracle: &dyn Oracle,
) -> std::result::Result<Artifacts, PipelineError> {
    let mut run = Run {
        config,
        oracle,
        renderer: SvgRenderer::default(),
        graph: Some(graph.clone()),
        traces: Vec::new(),
    };
    let (scene, graph) = run.realize()?;
    run.export(scene, graph, Vec::new(), Vec::new())
}

pub const SCENE_FILE: &str = "scene.json";
pub const LAYOUT_FILE: &str = "layout.json";
pub const TRACE_FILE: &str = "pid_trace.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.txt";
pub const FAILURE_FILE: &str = "failure.txt";

pub fn render_file_name(v: Viewpoint) -> String {
    format!("{}.svg", v.as_str())
}

pub fn trace_text(traces: &[Trace]) -> String {
    traces
        .iter()
        .map(Trace::to_table)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes every artifact of a successful run into `dir`, removing a stale
/// failure note if present.
pub fn write_artifacts(dir: &Path, a: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SCENE_FILE), encode_scene(&a.graph))?;
    fs::write(dir.join(LAYOUT_FILE), encode_fscene(&a.fscene))?;
    for r in &a.renders {
        fs::write(dir.join(render_file_name(r.viewpoint)), &r.document)?;
    }
    fs::write(dir.join(TRACE_FILE), trace_text(&a.traces))?;
    let mut diag = a.scene.diagnostics.join("\n");
    if !diag.is_empty() {
        diag.push('\n');
    }
    fs::write(dir.join(DIAGNOSTICS_FILE), diag)?;
    match fs::remove_file(dir.join(FAILURE_FILE)) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}

/// Records a failed run: the stage and error, the graph as it stood and
/// any PID traces gathered.
pub fn write_failure(dir: &Path, e: &PipelineError) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(FAILURE_FILE), format!("stage: {}\nerror: {}\n", e.stage, e.error))?;
    if let Some(g) = &e.graph {
        fs::write(dir.join(SCENE_FILE), encode_scene(g))?;
    }
    if !e.traces.is_empty() {
        fs::write(dir.join(TRACE_FILE), trace_text(&e.traces))?;
    }
    Ok(())
}
