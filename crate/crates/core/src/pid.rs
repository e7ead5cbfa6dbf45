//! PID correction of object scale and position. Each attribute gets its own
//! controller; the oracle's signed score is the measured error.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::graph::{CausalEdge, EdgeStatus, ObjectId};
use crate::layout::{LayoutOptions, LayoutScene, Placement, Renderer, Viewpoint};
use crate::oracle::Oracle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Largest step the actuator may take, in attribute units.
    pub delta_max: f64,
    pub gamma: f64,
    /// Stop once |error| is at most this many score units.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl PidParams {
    pub const SCALE: PidParams = PidParams {
        kp: 1.0,
        ki: 1e-5,
        kd: 5.0,
        delta_max: 0.02,
        gamma: 500.0,
        epsilon: 5.0,
        max_iters: 100,
    };

    pub const POSITION: PidParams = PidParams {
        kp: 1.0,
        ki: 1e-5,
        kd: 5.0,
        delta_max: 0.4,
        gamma: 800.0,
        epsilon: 5.0,
        max_iters: 100,
    };

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kp, self.ki, self.kd, self.delta_max, self.gamma, self.epsilon]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("PID parameters must be finite".into()));
        }
        if self.delta_max <= 0.0 || self.gamma <= 0.0 {
            return Err(Error::Config("delta_max and gamma must be positive".into()));
        }
        if self.epsilon < 0.0 {
            return Err(Error::Config("epsilon must not be negative".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    pub params: PidParams,
    integral: f64,
    prev_error: f64,
}

impl PidController {
    pub fn new(params: PidParams) -> Result<Self> {
        params.validate()?;
        Ok(PidController {
            params,
            integral: 0.0,
            prev_error: 0.0,
        })
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn prev_error(&self) -> f64 {
        self.prev_error
    }

    /// Feeds one error sample and returns the control signal.
    pub fn signal(&mut self, e: f64) -> f64 {
        self.integral += e;
        let d = e - self.prev_error;
        self.prev_error = e;
        self.params.kp * e + self.params.ki * self.integral + self.params.kd * d
    }

    pub fn actuate(&self, u: f64) -> f64 {
        actuate(u, self.params.delta_max, self.params.gamma)
    }
}

/// `delta * tanh(u / gamma)`, kept strictly inside (-delta, delta) even where
/// tanh rounds to one.
pub fn actuate(u: f64, delta: f64, gamma: f64) -> f64 {
    let g = delta * (u / gamma).tanh();
    if g.abs() >= delta {
        delta.next_down().copysign(g)
    } else {
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttributeKind {
    Scale,
    PositionX,
    PositionY,
    PositionZ,
}

impl AttributeKind {
    pub fn axis(self) -> Option<usize> {
        match self {
            AttributeKind::Scale => None,
            AttributeKind::PositionX => Some(0),
            AttributeKind::PositionY => Some(1),
            AttributeKind::PositionZ => Some(2),
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeKind::Scale => "scale",
            AttributeKind::PositionX => "x",
            AttributeKind::PositionY => "y",
            AttributeKind::PositionZ => "z",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTarget {
    pub object: ObjectId,
    pub kind: AttributeKind,
    /// Score the loop drives toward.
    pub alpha: f64,
}

impl AttributeTarget {
    pub fn new(object: impl Into<ObjectId>, kind: AttributeKind) -> Self {
        AttributeTarget {
            object: object.into(),
            kind,
            alpha: 0.0,
        }
    }
}

/// One scoring pass. `step` is `None` on the pass that stopped the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub score: f64,
    pub error: f64,
    pub integral: f64,
    pub derivative: f64,
    pub u: f64,
    pub step: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub target: AttributeTarget,
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl Trace {
    pub fn final_value(&self) -> Option<f64> {
        self.rows.last().map(|r| r.value)
    }

    pub fn updates(&self) -> usize {
        self.rows.iter().filter(|r| r.step.is_some()).count()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# {} {} ({})\n{:>5} {:>8} {:>8} {:>12} {:>9} {:>12} {:>12} {:>12}\n",
            self.target.object,
            self.target.kind,
            if self.converged { "converged" } else { "stopped" },
            "iter",
            "score",
            "e",
            "E",
            "d",
            "u",
            "gamma",
            "value"
        );
        for r in &self.rows {
            let step = r.step.map_or("-".to_string(), |g| format!("{g:.6}"));
            let _ = writeln!(
                out,
                "{:>5} {:>8.1} {:>8.1} {:>12.4} {:>9.1} {:>12.4} {:>12} {:>12.6}",
                r.iter, r.score, r.error, r.integral, r.derivative, r.u, step, r.value
            );
        }
        out
    }
}

/// A loop that stopped on an error, with the rows recorded before it.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    pub trace: Trace,
}

impl From<Aborted> for Error {
    fn from(a: Aborted) -> Error {
        a.error
    }
}

/// The iterative loop: score the current value, stop if close enough or out
/// of iterations, otherwise step. At most `max_iters` steps are taken.
pub fn run_loop(
    target: AttributeTarget,
    controller: &mut PidController,
    start: f64,
    mut score: impl FnMut(f64) -> Result<f64>,
    apply: impl Fn(f64, f64) -> f64,
) -> std::result::Result<(f64, Trace), Aborted> {
    let alpha = target.alpha;
    let mut trace = Trace {
        target,
        rows: Vec::new(),
        converged: false,
    };
    let mut value = start;
    let mut iter = 0;
    loop {
        let s = match score(value) {
            Ok(s) => s,
            Err(error) => return Err(Aborted { error, trace }),
        };
        let e = alpha - s;
        let stop_row = |c: &PidController| TraceRow {
            iter,
            score: s,
            error: e,
            integral: c.integral(),
            derivative: 0.0,
            u: 0.0,
            step: None,
            value,
        };
        if e.abs() <= controller.params.epsilon {
            trace.rows.push(stop_row(controller));
            trace.converged = true;
            return Ok((value, trace));
        }
        if iter >= controller.params.max_iters {
            trace.rows.push(stop_row(controller));
            return Ok((value, trace));
        }
        let d = e - controller.prev_error();
        let u = controller.signal(e);
        let g = controller.actuate(u);
        value = apply(value, g);
        trace.rows.push(TraceRow {
            iter,
            score: s,
            error: e,
            integral: controller.integral(),
            derivative: d,
            u,
            step: Some(g),
            value,
        });
        iter += 1;
    }
}

/// Runs the loop for one attribute of `edge`'s subject against the oracle,
/// re-rendering the scene before every score.
pub fn optimize_attribute(
    target: &AttributeTarget,
    scene: &mut LayoutScene,
    edge: &CausalEdge,
    renderer: &dyn Renderer,
    oracle: &dyn Oracle,
    controller: &mut PidController,
    options: &LayoutOptions,
) -> std::result::Result<(f64, Trace), Aborted> {
    let abort = |error: Error| Aborted {
        error,
        trace: Trace {
            target: target.clone(),
            rows: Vec::new(),
            converged: false,
        },
    };
    if target.object != edge.subject {
        return Err(abort(Error::Precondition(format!(
            "{} is not the subject of {edge}",
            target.object
        ))));
    }
    let (scale, center) = {
        let o = scene.get(&target.object).map_err(abort)?;
        (o.scale, o.center)
    };
    let id = target.object.clone();
    match target.kind.axis() {
        None => run_loop(
            target.clone(),
            controller,
            scale,
            |v| {
                // a new scale re-seats the subject against its anchor
                if v != scene.get(&id)?.scale {
                    scene.set_scale(&id, v)?;
                    scene.replace_subtree(&id, options, Placement::Lenient)?;
                }
                let image = renderer.render(scene, Viewpoint::ThreeQuarter)?;
                Ok(f64::from(oracle.scale_score(edge, &image, scene)?))
            },
            |v, g| v * (1.0 + g),
        ),
        Some(axis) => run_loop(
            target.clone(),
            controller,
            center[axis],
            |v| {
                let mut delta = [0.0; 3];
                delta[axis] = v - scene.get(&id)?.center[axis];
                if delta[axis] != 0.0 {
                    scene.translate_with_riders(&id, delta);
                }
                let image = renderer.render(scene, Viewpoint::ThreeQuarter)?;
                Ok(f64::from(oracle.position_scores(edge, &image, scene)?.axis(axis)))
            },
            |v, g| v + g,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidConfig {
    pub scale: PidParams,
    pub position: PidParams,
}

impl Default for PidConfig {
    fn default() -> Self {
        PidConfig {
            scale: PidParams::SCALE,
            position: PidParams::POSITION,
        }
    }
}

/// Corrects the subject's scale, then its x, y and z position. Traces are
/// appended to `traces` as each loop finishes, including a partial one when
/// a loop aborts.
pub fn refine_edge_attributes(
    edge: &CausalEdge,
    scene: &LayoutScene,
    renderer: &dyn Renderer,
    oracle: &dyn Oracle,
    config: &PidConfig,
    options: &LayoutOptions,
    traces: &mut Vec<Trace>,
) -> Result<LayoutScene> {
    if !matches!(edge.status, EdgeStatus::Kept | EdgeStatus::Modified) {
        return Err(Error::Precondition(format!("{edge} is not kept or modified")));
    }
    let mut out = scene.clone();
    for kind in [
        AttributeKind::Scale,
        AttributeKind::PositionX,
        AttributeKind::PositionY,
        AttributeKind::PositionZ,
    ] {
        let params = if kind == AttributeKind::Scale { config.scale } else { config.position };
        let mut controller = PidController::new(params)?;
        let target = AttributeTarget::new(edge.subject.clone(), kind);
        match optimize_attribute(&target, &mut out, edge, renderer, oracle, &mut controller, options) {
            Ok((_, trace)) => traces.push(trace),
            Err(a) => {
                traces.push(a.trace);
                return Err(a.error);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_examples() {
        let mut c = PidController::new(PidParams::SCALE).unwrap();
        assert_eq!(c.signal(0.0), 0.0);

        let mut p = PidController::new(PidParams {
            ki: 0.0,
            kd: 0.0,
            ..PidParams::SCALE
        })
        .unwrap();
        assert_eq!(p.signal(-50.0), -50.0);

        let mut c = PidController::new(PidParams::SCALE).unwrap();
        let u = c.signal(10.0);
        assert!((u - 60.0001).abs() < 1e-9);
        assert_eq!(c.integral(), 10.0);
        assert_eq!(c.prev_error(), 10.0);
    }

    #[test]
    fn actuator_examples() {
        assert_eq!(actuate(0.0, 0.02, 500.0), 0.0);
        assert!((actuate(500.0, 0.02, 500.0) - 0.02 * 1f64.tanh()).abs() < 1e-15);
        let g = actuate(1e6, 0.4, 800.0);
        assert!(g < 0.4 && g > 0.3999);
        assert_eq!(actuate(-1e6, 0.4, 800.0), -g);
    }

    #[test]
    fn bad_params() {
        for p in [
            PidParams { delta_max: 0.0, ..PidParams::SCALE },
            PidParams { gamma: -1.0, ..PidParams::SCALE },
            PidParams { max_iters: 0, ..PidParams::SCALE },
            PidParams { kp: f64::NAN, ..PidParams::SCALE },
        ] {
            assert!(matches!(PidController::new(p), Err(Error::Config(_))));
        }
    }

    #[test]
    fn zero_score_stops_at_once() {
        let mut c = PidController::new(PidParams::SCALE).unwrap();
        let mut calls = 0;
        let (v, t) = run_loop(
            AttributeTarget::new("a", AttributeKind::Scale),
            &mut c,
            1.0,
            |_| {
                calls += 1;
                Ok(0.0)
            },
            |v, g| v * (1.0 + g),
        )
        .unwrap();
        assert_eq!((v, calls, t.rows.len()), (1.0, 1, 1));
        assert!(t.converged);
    }

    #[test]
    fn saturated_score_runs_out_of_iterations() {
        let params = PidParams {
            max_iters: 20,
            ..PidParams::POSITION
        };
        let mut c = PidController::new(params).unwrap();
        let (v, t) = run_loop(
            AttributeTarget::new("a", AttributeKind::PositionX),
            &mut c,
            0.0,
            |_| Ok(100.0),
            |v, g| v + g,
        )
        .unwrap();
        assert_eq!(t.updates(), 20);
        assert!(!t.converged);
        assert!((-20.0 * 0.4..0.0).contains(&v));
    }

    #[test]
    fn abort_keeps_partial_trace() {
        let mut c = PidController::new(PidParams::POSITION).unwrap();
        let mut n = 0;
        let err = run_loop(
            AttributeTarget::new("a", AttributeKind::PositionX),
            &mut c,
            0.0,
            |_| {
                n += 1;
                if n > 3 {
                    Err(Error::OracleUnavailable("gone".into()))
                } else {
                    Ok(50.0)
                }
            },
            |v, g| v + g,
        )
        .unwrap_err();
        assert_eq!(err.trace.rows.len(), 3);
        assert!(matches!(err.error, Error::OracleUnavailable(_)));
    }

    #[test]
    fn table_has_a_row_per_pass() {
        let mut c = PidController::new(PidParams::POSITION).unwrap();
        let (_, t) = run_loop(
            AttributeTarget::new("cup-1", AttributeKind::PositionZ),
            &mut c,
            0.0,
            |v| Ok(100.0 * v),
            |v, g| v + g,
        )
        .unwrap();
        let table = t.to_table();
        assert!(table.starts_with("# cup-1 z (converged)"));
        assert_eq!(table.lines().count(), 2 + t.rows.len());
    }
}
