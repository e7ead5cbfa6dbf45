//! Chat-completions client with an on-disk response cache.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::payload::{parse_answer_payload, Payload};
use super::{prompts, AxisScores, InterventionJudgment, Oracle, PrecedenceEstimate};
use crate::error::{Error, Result};
use crate::grammar::slug;
use crate::graph::{CausalEdge, CausalSceneGraph, Dims, ObjectId, SceneMeta, SceneObject, SpatialRelation};
use crate::layout::{LayoutScene, RenderedView};

pub const API_KEY_ENV: &str = "CAUSALSTRUCT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// Serve from the cache when possible, otherwise call out and record.
    Live,
    /// Serve only from the cache; a miss is an error.
    Replay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// First retry delay in seconds; doubles on each further attempt.
    pub backoff_base_s: f64,
    /// Sampling temperature for repeated trials.
    pub temperature: f64,
    pub mode: CacheMode,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            timeout_s: 60.0,
            max_retries: 3,
            backoff_base_s: 1.0,
            temperature: 0.7,
            mode: CacheMode::Live,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth another attempt: timeouts, connection failures, 429 and 5xx.
    Retryable(String),
    Fatal(String),
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportError::Retryable(m) | TransportError::Fatal(m) => f.write_str(m),
        }
    }
}

pub trait Transport: Send + Sync {
    /// POSTs a JSON body and returns the response body of a 2xx reply.
    fn post(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> std::result::Result<String, TransportError>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> std::result::Result<String, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_)
            | ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound => TransportError::Retryable(e.to_string()),
            other => TransportError::Fatal(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(TransportError::Retryable(format!("HTTP {status}"))),
            _ => Err(TransportError::Fatal(format!("HTTP {status}: {text}"))),
        }
    }
}

/// Extracts the assistant message text from a chat-completions body.
pub fn decode_chat_body(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| Error::MalformedResponse(format!("response is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::MalformedResponse("no choices[0].message.content".into()))
}

#[derive(Clone)]
pub struct RemoteOracle {
    config: RemoteConfig,
    cache_dir: Option<PathBuf>,
    seed: u64,
    transport: Arc<dyn Transport>,
    token: Option<String>,
}

impl fmt::Debug for RemoteOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteOracle")
            .field("config", &self.config)
            .field("cache_dir", &self.cache_dir)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

impl RemoteOracle {
    /// Reads the bearer token from [`API_KEY_ENV`] if set.
    pub fn new(
        config: RemoteConfig,
        cache_dir: Option<PathBuf>,
        seed: u64,
        transport: Arc<dyn Transport>,
    ) -> Result<Self> {
        if config.mode == CacheMode::Replay && cache_dir.is_none() {
            return Err(Error::Config("replay mode needs a cache directory".into()));
        }
        if !(config.timeout_s.is_finite() && config.timeout_s > 0.0) {
            return Err(Error::Config("timeout_s must be positive".into()));
        }
        Ok(RemoteOracle {
            config,
            cache_dir,
            seed,
            transport,
            token: std::env::var(API_KEY_ENV).ok().filter(|t| !t.is_empty()),
        })
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    fn request(&self, system: &str, user: &str, image: Option<&RenderedView>, sampled: bool) -> String {
        let content = match image {
            None => json!(user),
            Some(img) => {
                let b64 = base64::engine::general_purpose::STANDARD.encode(img.document.as_bytes());
                json!([
                    {"type": "text", "text": user},
                    {"type": "image_url", "image_url": {"url": format!("data:image/svg+xml;base64,{b64}")}}
                ])
            }
        };
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": content},
            ],
            "temperature": if sampled { self.config.temperature } else { 0.0 },
            "seed": self.seed,
        });
        body.to_string()
    }

    /// Cache key for one request at one trial index.
    pub fn cache_key(request: &str, trial: usize) -> String {
        let mut h = Sha256::new();
        h.update(request.as_bytes());
        h.update(b"\n");
        h.update(trial.to_string().as_bytes());
        hex::encode(h.finalize())
    }

    fn cache_path(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    fn call(&self, request: &str, trial: usize) -> Result<String> {
        let key = Self::cache_key(request, trial);
        if let Some(dir) = &self.cache_dir {
            let path = Self::cache_path(dir, &key);
            match std::fs::read_to_string(&path) {
                Ok(body) => return Ok(body),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
            if self.config.mode == CacheMode::Replay {
                return Err(Error::OracleUnavailable(format!("replay cache has no entry {key}")));
            }
        }
        let timeout = Duration::from_secs_f64(self.config.timeout_s);
        let mut attempt = 0u32;
        let body = loop {
            match self
                .transport
                .post(&self.config.endpoint, self.token.as_deref(), request, timeout)
            {
                Ok(b) => break b,
                Err(TransportError::Retryable(m)) if attempt < self.config.max_retries => {
                    let wait = self.config.backoff_base_s * 2f64.powi(attempt as i32);
                    if wait > 0.0 {
                        std::thread::sleep(Duration::from_secs_f64(wait));
                    }
                    attempt += 1;
                    let _ = m;
                }
                Err(e) => {
                    return Err(Error::OracleUnavailable(format!(
                        "{} after {} attempt(s): {e}",
                        self.config.endpoint,
                        attempt + 1
                    )))
                }
            }
        };
        if let Some(dir) = &self.cache_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(Self::cache_path(dir, &key), &body)?;
        }
        Ok(body)
    }

    fn ask(
        &self,
        system: &str,
        user: &str,
        image: Option<&RenderedView>,
        trial: Option<usize>,
    ) -> Result<Payload> {
        let request = self.request(system, user, image, trial.is_some());
        let body = self.call(&request, trial.unwrap_or(0))?;
        parse_answer_payload(&decode_chat_body(&body)?)
    }

    fn candidates(current: SpatialRelation) -> Vec<SpatialRelation> {
        SpatialRelation::ALL
            .into_iter()
            .filter(|r| *r != current)
            .collect()
    }

    fn judgment(&self, edge: &CausalEdge, image: Option<&RenderedView>, trial: usize) -> Result<InterventionJudgment> {
        let system = prompts::intervention_system(&Self::candidates(edge.relation));
        let user = format!("Edge: {}", prompts::edge_text(edge));
        match self.ask(&system, &user, image, Some(trial))? {
            Payload::Judgment(j) => Ok(j),
            other => Err(unexpected("judgment", &other)),
        }
    }
}

fn unexpected(want: &str, got: &Payload) -> Error {
    Error::MalformedResponse(format!("expected {want}, got {got:?}"))
}

impl Oracle for RemoteOracle {
    fn propose_graph(&self, prompt: &str) -> Result<CausalSceneGraph> {
        if prompt.trim().is_empty() {
            return Err(Error::Grammar("empty prompt".into()));
        }
        let edges = match self.ask(&prompts::causal_order_system(), &prompts::scene_user(prompt), None, None)? {
            Payload::Edges(e) => e,
            other => return Err(unexpected("edges", &other)),
        };
        let mut names: Vec<String> = Vec::new();
        for (s, _, t) in &edges {
            for n in [s, t] {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        let dims: BTreeMap<String, [f64; 3]> =
            match self.ask(prompts::dims_system(), &prompts::dims_user(&names), None, None)? {
                Payload::Dims(d) => d.into_iter().collect(),
                other => return Err(unexpected("dims", &other)),
            };
        let mut counters: BTreeMap<String, usize> = BTreeMap::new();
        let mut ids: BTreeMap<&String, ObjectId> = BTreeMap::new();
        let mut nodes = Vec::new();
        for n in &names {
            let d = dims
                .get(n)
                .ok_or_else(|| Error::MalformedResponse(format!("no dimensions for `{n}`")))?;
            let base = slug(n);
            let k = counters.entry(base.clone()).or_insert(0);
            *k += 1;
            let id = ObjectId::new(format!("{base}-{k}"));
            ids.insert(n, id.clone());
            nodes.push(
                SceneObject::new(id, n.clone(), Dims::new(d[0], d[1], d[2]))
                    .map_err(|e| Error::MalformedResponse(e.to_string()))?,
            );
        }
        let mut seen = std::collections::BTreeSet::new();
        let edges = edges
            .iter()
            .filter(|(s, _, t)| s != t && seen.insert((s.clone(), t.clone())))
            .map(|(s, r, t)| CausalEdge::new(ids[s].clone(), *r, ids[t].clone()))
            .collect();
        CausalSceneGraph::new(
            nodes,
            edges,
            SceneMeta {
                prompt: prompt.to_string(),
            },
        )
        .map_err(|e| Error::MalformedResponse(e.to_string()))
    }

    fn precedence(&self, a: &SceneObject, b: &SceneObject) -> Result<PrecedenceEstimate> {
        if a.id == b.id {
            return Err(Error::Precondition(format!("precedence of `{}` with itself", a.id)));
        }
        let edges = match self.ask(&prompts::causal_order_system(), &prompts::pair_user(a, b), None, None)? {
            Payload::Edges(e) => e,
            other => return Err(unexpected("edges", &other)),
        };
        let (ai, bi) = (a.id.as_str(), b.id.as_str());
        let hit = edges
            .iter()
            .find(|(s, _, t)| (s == ai && t == bi) || (s == bi && t == ai));
        let (c_ij, c_ji) = match hit {
            Some((s, _, _)) if s == ai => (0.9, 0.1),
            Some(_) => (0.1, 0.9),
            None => (0.5, 0.5),
        };
        Ok(PrecedenceEstimate { c_ij, c_ji })
    }

    fn edge_prior(&self, edge: &CausalEdge) -> Result<f64> {
        let user = format!("Edge: {}", prompts::edge_text(edge));
        match self.ask(prompts::confidence_system(), &user, None, None)? {
            Payload::Score(s) => Ok(f64::from(s.clamp(0, 100)) / 100.0),
            other => Err(unexpected("score", &other)),
        }
    }

    fn edge_trials(&self, edge: &CausalEdge, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Precondition("trial count must be at least 1".into()));
        }
        let mut yes = 0usize;
        for t in 0..k {
            match self.judgment(edge, None, t) {
                Ok(InterventionJudgment::Keep) => yes += 1,
                Ok(_) | Err(Error::MalformedResponse(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(yes as f64 / k as f64)
    }

    fn intervention_judgment(
        &self,
        edge: &CausalEdge,
        image: &RenderedView,
        trial: usize,
    ) -> Result<InterventionJudgment> {
        self.judgment(edge, Some(image), trial)
    }

    fn scale_score(&self, edge: &CausalEdge, image: &RenderedView, _scene: &LayoutScene) -> Result<i32> {
        let user = format!("Edge: {}", prompts::edge_text(edge));
        match self.ask(prompts::scale_system(), &user, Some(image), None)? {
            Payload::Score(s) => Ok(s),
            other => Err(unexpected("score", &other)),
        }
    }

    fn position_scores(
        &self,
        edge: &CausalEdge,
        image: &RenderedView,
        _scene: &LayoutScene,
    ) -> Result<AxisScores> {
        let user = format!("Edge: {}", prompts::edge_text(edge));
        match self.ask(prompts::position_system(), &user, Some(image), None)? {
            Payload::Scores(s) => Ok(s),
            other => Err(unexpected("three scores", &other)),
        }
    }

    fn complete_edge(&self, graph: &CausalSceneGraph, isolated: &ObjectId) -> Result<Option<CausalEdge>> {
        let listing: Vec<String> = graph.nodes().values().map(prompts::describe).collect();
        let user = format!(
            "Objects: {}.\n`{isolated}` has no edge. Give one edge connecting it to another object.",
            listing.join("; ")
        );
        let edges = match self.ask(&prompts::causal_order_system(), &user, None, None)? {
            Payload::Edges(e) => e,
            other => return Err(unexpected("edges", &other)),
        };
        let known = |id: &str| id != isolated.as_str() && graph.nodes().contains_key(&ObjectId::from(id));
        Ok(edges
            .into_iter()
            .find(|(s, _, t)| {
                (s == isolated.as_str() && known(t)) || (t == isolated.as_str() && known(s))
            })
            .map(|(s, r, t)| CausalEdge::new(s, r, t)))
    }
}
