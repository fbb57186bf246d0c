//! Flat key=value experiment configuration.
//!
//! Subcommands read an optional config file and overlay command-line
//! flags on top (flags win). Keys are the long flag names; unknown keys
//! are rejected. The effective configuration is echoed as `# key=value`
//! comment lines at the top of every output so a run can be reproduced
//! from its own artifact.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<srrs::Error> for ConfigError {
    fn from(e: srrs::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ConfigError>;

/// Ordered key=value map with typed accessors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse `key=value` lines; `#` starts a comment, blank lines are
    /// skipped, keys must come from `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !allowed.contains(&key) {
                return Err(ConfigError(format!(
                    "line {}: unknown key {key:?} (allowed: {})",
                    lineno + 1,
                    allowed.join(", ")
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
        }
        Ok(KvConfig { entries })
    }

    /// Canonical text form: sorted `key=value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Overlay `flags` on top of this config (flags win).
    pub fn overlay(&mut self, flags: &KvConfig) {
        for (k, v) in &flags.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ConfigError(format!("key {key:?}: {s:?} is not a number"))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?
            .ok_or_else(|| ConfigError(format!("missing required key {key:?}")))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| ConfigError(format!("key {key:?}: {s:?} is not a positive integer"))),
        }
    }

    pub fn require_u64(&self, key: &str) -> Result<u64> {
        self.get_u64(key)?
            .ok_or_else(|| ConfigError(format!("missing required key {key:?}")))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(other) => Err(ConfigError(format!(
                "key {key:?}: {other:?} is not a boolean"
            ))),
        }
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| ConfigError(format!("key {key:?}: {p:?} is not a number")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}
