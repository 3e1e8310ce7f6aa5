//! Run configuration files.
//!
//! A run file is one JSON object:
//!
//! ```json
//! {
//!   "seeds": [0, 1, 2],
//!   "episodes_per_seed": 10,
//!   "env": { "arena": { "hazards": 8 }, "task": { "horizon": 1000 } }
//! }
//! ```
//!
//! Every key is optional except `seeds`; omitted environment fields take
//! their defaults. Unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shieldsim_core::{EnvConfig, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub episodes_per_seed: usize,
    #[serde(default)]
    pub env: EnvConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    GoalSeek,
    Random,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::GoalSeek => "goal-seek",
            PolicyKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<PolicyKind> {
        [PolicyKind::GoalSeek, PolicyKind::Random].into_iter().find(|p| p.name() == s)
    }
}

/// Everything needed to run a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env_path: Option<PathBuf>,
    pub env: EnvConfig,
    pub modes: Vec<Mode>,
    pub policy: PolicyKind,
    pub seeds: Vec<u64>,
    pub episodes_per_seed: usize,
    pub out_dir: PathBuf,
    /// Also write one JSON episode log per episode.
    pub traces: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.seeds.is_empty() {
            return Err("seeds must not be empty".into());
        }
        if self.episodes_per_seed == 0 {
            return Err("episodes_per_seed must be positive".into());
        }
        if self.modes.is_empty() {
            return Err("no modes selected".into());
        }
        self.env.validate().map(|_| ()).map_err(|e| e.to_string())
    }
}

pub fn parse_run_file(text: &str, path: &Path) -> Result<RunFile, ConfigError> {
    let file: RunFile = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e),
    })?;
    let invalid = |message: String| ConfigError::Invalid { path: path.to_path_buf(), message };
    if file.seeds.is_empty() {
        return Err(invalid("seeds must not be empty".into()));
    }
    if file.episodes_per_seed == 0 {
        return Err(invalid("episodes_per_seed must be positive".into()));
    }
    file.env.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(file)
}

pub fn load_run_file(path: &Path) -> Result<RunFile, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_run_file(&text, path)
}

/// Loads a bare environment config (no run keys).
pub fn load_env_config(path: &Path) -> Result<EnvConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let cfg: EnvConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e),
    })?;
    cfg.validate().map_err(|e| ConfigError::Invalid { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(cfg)
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

/// `all` or a comma-separated list of mode names.
pub fn parse_modes(s: &str) -> Result<Vec<Mode>, String> {
    if s == "all" {
        return Ok(Mode::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let m = Mode::parse(part.trim()).ok_or_else(|| format!("unknown mode `{part}`"))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
