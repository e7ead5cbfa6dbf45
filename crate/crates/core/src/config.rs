//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! output_dir = "out"
//! seed = 7
//! tau1 = 0.7
//! tau2 = 0.5
//! gap = 0.05
//! grid_spacing = 1.5
//!
//! [oracle]
//! backend = "deterministic"   # or "remote"
//! trials = 5
//! truth = "truth.json"        # deterministic only, relative to this file
//! cache_dir = "cache"
//!
//! [oracle.remote]
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4o"
//! mode = "replay"             # or "live"
//!
//! [pid.scale]
//! max_iters = 100
//! ```
//!
//! Every key is optional. The remote token is read from the environment,
//! never from this file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bayes::{DEFAULT_TAU1, DEFAULT_TAU2, DEFAULT_TRIALS};
use crate::error::{Error, Result};
use crate::layout::LayoutOptions;
use crate::oracle::{decode_truth, Backend, CacheMode, OracleConfig, RemoteConfig};
use crate::pid::{PidConfig, PidParams};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub oracle: OracleConfig,
    pub tau1: f64,
    pub tau2: f64,
    pub pid: PidConfig,
    pub layout: LayoutOptions,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Truth table to load for the deterministic backend.
    pub truth_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            oracle: OracleConfig::default(),
            tau1: DEFAULT_TAU1,
            tau2: DEFAULT_TAU2,
            pid: PidConfig::default(),
            layout: LayoutOptions::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            truth_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {t}")));
            }
        }
        self.pid.scale.validate()?;
        self.pid.position.validate()?;
        if self.oracle.trials_k == 0 {
            return Err(Error::Config("oracle.trials must be at least 1".into()));
        }
        let l = &self.layout;
        if !(l.gap.is_finite() && l.gap >= 0.0) {
            return Err(Error::Config("gap must be a non-negative number".into()));
        }
        if !(l.grid_spacing.is_finite() && l.grid_spacing > 0.0) {
            return Err(Error::Config("grid_spacing must be positive".into()));
        }
        if let Backend::Remote(r) = &self.oracle.backend {
            if !(r.timeout_s.is_finite() && r.timeout_s > 0.0) {
                return Err(Error::Config("oracle.remote.timeout_s must be positive".into()));
            }
            if !(r.backoff_base_s.is_finite() && r.backoff_base_s >= 0.0) {
                return Err(Error::Config("oracle.remote.backoff_base_s must not be negative".into()));
            }
            if r.mode == CacheMode::Replay && self.oracle.cache_dir.is_none() {
                return Err(Error::Config("replay mode needs oracle.cache_dir".into()));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Doc {
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    gap: Option<f64>,
    grid_spacing: Option<f64>,
    #[serde(default)]
    oracle: OracleDoc,
    #[serde(default)]
    pid: PidDoc,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OracleDoc {
    backend: Option<String>,
    trials: Option<usize>,
    truth: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    remote: Option<RemoteDoc>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RemoteDoc {
    endpoint: Option<String>,
    model: Option<String>,
    timeout_s: Option<f64>,
    max_retries: Option<u32>,
    backoff_base_s: Option<f64>,
    temperature: Option<f64>,
    mode: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PidDoc {
    scale: Option<ParamsDoc>,
    position: Option<ParamsDoc>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    kp: Option<f64>,
    ki: Option<f64>,
    kd: Option<f64>,
    delta_max: Option<f64>,
    gamma: Option<f64>,
    epsilon: Option<f64>,
    max_iters: Option<usize>,
}

impl ParamsDoc {
    fn over(self, base: PidParams) -> PidParams {
        PidParams {
            kp: self.kp.unwrap_or(base.kp),
            ki: self.ki.unwrap_or(base.ki),
            kd: self.kd.unwrap_or(base.kd),
            delta_max: self.delta_max.unwrap_or(base.delta_max),
            gamma: self.gamma.unwrap_or(base.gamma),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            max_iters: self.max_iters.unwrap_or(base.max_iters),
        }
    }
}

/// Parses configuration text. Paths are returned as written; the truth
/// table is not loaded.
pub fn decode_config(text: &str) -> Result<PipelineConfig> {
    let doc: Doc = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let d = PipelineConfig::default();
    let remote = match doc.oracle.backend.as_deref() {
        None | Some("deterministic") => {
            if doc.oracle.remote.is_some() {
                return Err(Error::Config("[oracle.remote] given for the deterministic backend".into()));
            }
            None
        }
        Some("remote") => {
            let r = doc.oracle.remote.unwrap_or_default();
            let base = RemoteConfig::default();
            let mode = match r.mode.as_deref() {
                None | Some("live") => CacheMode::Live,
                Some("replay") => CacheMode::Replay,
                Some(m) => return Err(Error::Config(format!("unknown oracle.remote.mode `{m}`"))),
            };
            Some(RemoteConfig {
                endpoint: r.endpoint.unwrap_or(base.endpoint),
                model: r.model.unwrap_or(base.model),
                timeout_s: r.timeout_s.unwrap_or(base.timeout_s),
                max_retries: r.max_retries.unwrap_or(base.max_retries),
                backoff_base_s: r.backoff_base_s.unwrap_or(base.backoff_base_s),
                temperature: r.temperature.unwrap_or(base.temperature),
                mode,
            })
        }
        Some(b) => return Err(Error::Config(format!("unknown oracle.backend `{b}`"))),
    };
    if remote.is_some() && doc.oracle.truth.is_some() {
        return Err(Error::Config("oracle.truth only applies to the deterministic backend".into()));
    }
    let seed = doc.seed.unwrap_or(d.seed);
    let config = PipelineConfig {
        oracle: OracleConfig {
            trials_k: doc.oracle.trials.unwrap_or(DEFAULT_TRIALS),
            backend: match remote {
                Some(r) => Backend::Remote(r),
                None => Backend::Deterministic { truth: None },
            },
            cache_dir: doc.oracle.cache_dir,
            seed,
        },
        tau1: doc.tau1.unwrap_or(d.tau1),
        tau2: doc.tau2.unwrap_or(d.tau2),
        pid: PidConfig {
            scale: doc.pid.scale.unwrap_or_default().over(PidParams::SCALE),
            position: doc.pid.position.unwrap_or_default().over(PidParams::POSITION),
        },
        layout: LayoutOptions {
            gap: doc.gap.unwrap_or(d.layout.gap),
            grid_spacing: doc.grid_spacing.unwrap_or(d.layout.grid_spacing),
        },
        output_dir: doc.output_dir.unwrap_or(d.output_dir),
        seed,
        truth_path: doc.oracle.truth,
    };
    config.validate()?;
    Ok(config)
}

/// Reads a config file, resolves its relative paths against the file's
/// directory and loads the truth table if one is named.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut config = decode_config(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    rebase(&mut config.output_dir);
    if let Some(p) = config.oracle.cache_dir.as_mut() {
        rebase(p);
    }
    if let Some(p) = config.truth_path.as_mut() {
        rebase(p);
    }
    config.load_truth()?;
    Ok(config)
}

impl PipelineConfig {
    /// Loads `truth_path` into the deterministic backend.
    pub fn load_truth(&mut self) -> Result<()> {
        if let (Some(path), Backend::Deterministic { truth }) = (&self.truth_path, &mut self.oracle.backend) {
            let text = std::fs::read_to_string(path)?;
            *truth = Some(decode_truth(&text)?);
        }
        Ok(())
    }
}
