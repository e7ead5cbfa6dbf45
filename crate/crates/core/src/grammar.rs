//! Structured scene prompts.
//!
//! ```text
//! obj(table, 120, 60, 75); obj(cup, 8, 8, 10, assets/cup.ply)
//! rel(cup, under, table)
//! truth(cup, on, table); scale(cup, 1.3)
//! ```
//!
//! Statements are separated by `;` or newlines. `obj` takes a name, length,
//! width and height in centimeters and an optional asset reference; ids are
//! assigned as `slug-n`. `rel` proposes an edge, `truth` records the
//! reference relation for the deterministic oracle and `scale` sets an
//! object's starting scale. Objects may be referenced by id or by a unique
//! name.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::graph::{CausalEdge, CausalSceneGraph, Dims, ObjectId, SceneMeta, SceneObject, SpatialRelation};
use crate::oracle::GroundTruth;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPrompt {
    pub graph: CausalSceneGraph,
    /// `truth(...)` statements, or the `rel(...)` edges when there are none,
    /// with unit scales and 1 m reference extents for every object.
    pub truth: GroundTruth,
}

fn statement_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([a-z_]+)\s*\((.*)\)$").expect("valid regex"))
}

pub fn slug(name: &str) -> String {
    let mut s: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if s.is_empty() {
        s.push_str("object");
    }
    s
}

pub fn parse_prompt(prompt: &str) -> Result<ParsedPrompt> {
    let statements: Vec<(usize, &str)> = prompt
        .split([';', '\n'])
        .map(str::trim)
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .collect();
    if statements.is_empty() {
        return Err(Error::Grammar("empty prompt".into()));
    }

    let mut objects: Vec<SceneObject> = Vec::new();
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut rels: Vec<(String, SpatialRelation, String, usize)> = Vec::new();
    let mut truths: Vec<(String, SpatialRelation, String, usize)> = Vec::new();
    let mut scales: Vec<(String, f64, usize)> = Vec::new();

    for (n, stmt) in statements {
        let n = n + 1;
        let err = |m: &str| Error::Grammar(format!("statement {n} `{stmt}`: {m}"));
        let caps = statement_re()
            .captures(stmt)
            .ok_or_else(|| err("expected `keyword(args)`"))?;
        let args: Vec<&str> = caps[2].split(',').map(str::trim).collect();
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| err(&format!("`{s}` is not a positive number")))
        };
        let word = |s: &str| s.parse::<SpatialRelation>().map_err(|e| err(&e.to_string()));
        match (&caps[1], args.len()) {
            ("obj", 4 | 5) => {
                if args[0].is_empty() {
                    return Err(err("empty object name"));
                }
                let base = slug(args[0]);
                let k = counters.entry(base.clone()).or_insert(0);
                *k += 1;
                let dims = Dims::new(number(args[1])?, number(args[2])?, number(args[3])?);
                let mut o = SceneObject::new(format!("{base}-{k}"), args[0], dims)?;
                o.asset_ref = args.get(4).filter(|a| !a.is_empty()).map(|a| a.to_string());
                objects.push(o);
            }
            ("rel", 3) => rels.push((args[0].into(), word(args[1])?, args[2].into(), n)),
            ("truth", 3) => truths.push((args[0].into(), word(args[1])?, args[2].into(), n)),
            ("scale", 2) => scales.push((args[0].into(), number(args[1])?, n)),
            (kw @ ("obj" | "rel" | "truth" | "scale"), k) => {
                return Err(err(&format!("wrong number of arguments to `{kw}` ({k})")))
            }
            (kw, _) => return Err(err(&format!("unknown statement `{kw}`"))),
        }
    }

    let resolve = |r: &str, n: usize| -> Result<ObjectId> {
        if let Some(o) = objects.iter().find(|o| o.id.as_str() == r) {
            return Ok(o.id.clone());
        }
        let named: Vec<&SceneObject> = objects.iter().filter(|o| o.name == r).collect();
        match named.as_slice() {
            [one] => Ok(one.id.clone()),
            [] => Err(Error::Grammar(format!("statement {n}: unknown object `{r}`"))),
            _ => Err(Error::Grammar(format!("statement {n}: `{r}` is ambiguous, use an id"))),
        }
    };

    let mut edges = Vec::new();
    for (s, r, t, n) in &rels {
        edges.push(CausalEdge::new(resolve(s, *n)?, *r, resolve(t, *n)?));
    }
    let mut truth = GroundTruth::default();
    let truth_src = if truths.is_empty() { &rels } else { &truths };
    for (s, r, t, n) in truth_src {
        let key = (resolve(s, *n)?, resolve(t, *n)?);
        if key.0 == key.1 {
            return Err(Error::Grammar(format!("statement {n}: relation from `{s}` to itself")));
        }
        truth.true_relations.insert(key, *r);
    }
    let scales = scales
        .iter()
        .map(|(r, v, n)| Ok((resolve(r, *n)?, *v)))
        .collect::<Result<Vec<_>>>()?;
    for (id, v) in scales {
        if let Some(o) = objects.iter_mut().find(|o| o.id == id) {
            o.scale = v;
        }
    }
    let truth = truth.with_defaults_for(objects.iter().map(|o| &o.id));
    let graph = CausalSceneGraph::new(
        objects,
        edges,
        SceneMeta {
            prompt: prompt.to_string(),
        },
    )
    .map_err(|e| Error::Grammar(e.to_string()))?;
    Ok(ParsedPrompt { graph, truth })
}
