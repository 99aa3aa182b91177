//! Run configuration: planner and follower settings from JSON or flat
//! `key=value` text, with command-line overrides layered on top.
//!
//! Flat keys name planner fields directly (`iterations=500`), weights either
//! bare or dotted (`w_col=1e4`, `weights.w_col=1e4`) and follower fields with
//! a `follower.` prefix. JSON documents use the same shape as
//! [`RunConfig::to_json`].

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::harness::FollowerConfig;
use crate::losses::LossWeights;
use crate::optimizer::PlannerConfig;

const WEIGHT_KEYS: [&str; 5] = ["w_dist", "w_col", "w_constr", "w_vel", "w_time"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub planner: PlannerConfig,
    pub follower: FollowerConfig,
}

/// Nested JSON object of overrides, applied in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    root: Map<String, Value>,
}

fn scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn path_for(key: &str) -> Vec<String> {
    let key = key.trim();
    if WEIGHT_KEYS.contains(&key) {
        return vec!["planner".into(), "weights".into(), key.into()];
    }
    let parts: Vec<String> = key.split('.').map(str::to_string).collect();
    match parts.first().map(String::as_str) {
        Some("follower") | Some("planner") => parts,
        _ => std::iter::once("planner".to_string()).chain(parts).collect(),
    }
}

fn merge(dst: &mut Map<String, Value>, src: &Map<String, Value>) {
    for (k, v) in src {
        match (dst.get_mut(k), v) {
            (Some(Value::Object(d)), Value::Object(s)) => merge(d, s),
            _ => {
                dst.insert(k.clone(), v.clone());
            }
        }
    }
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: Value) {
        let path = path_for(key);
        let mut node = &mut self.root;
        for part in &path[..path.len() - 1] {
            let entry = node.entry(part.clone()).or_insert_with(|| Value::Object(Map::new()));
            if !entry.is_object() {
                *entry = Value::Object(Map::new());
            }
            node = entry.as_object_mut().expect("object");
        }
        node.insert(path[path.len() - 1].clone(), value);
    }

    /// `key=value` pair; the value is parsed as JSON when possible.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("expected key=value, got '{pair}'")))?;
        if k.trim().is_empty() {
            return Err(ConfigError::Invalid(format!("empty key in '{pair}'")));
        }
        self.set(k, scalar(v.trim()));
        Ok(())
    }

    /// Comma-separated `w_name=value` list.
    pub fn set_weights(&mut self, list: &str) -> Result<(), ConfigError> {
        for pair in list.split(',').filter(|p| !p.trim().is_empty()) {
            let key = pair.split_once('=').map(|(k, _)| k.trim()).unwrap_or("");
            if !WEIGHT_KEYS.contains(&key) {
                return Err(ConfigError::Invalid(format!("unknown weight '{key}'")));
            }
            self.set_pair(pair)?;
        }
        Ok(())
    }

    pub fn extend(&mut self, other: &Overrides) {
        merge(&mut self.root, &other.root);
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }
}

/// Parses a config document; JSON when it starts with `{`.
pub fn parse_config_text(text: &str) -> Result<Overrides, ConfigError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let value: Value = serde_json::from_str(trimmed)?;
        let Value::Object(map) = value else {
            return Err(ConfigError::Invalid("config JSON must be an object".into()));
        };
        let mut out = Overrides::default();
        for (k, v) in map {
            match (k.as_str(), v) {
                ("planner" | "follower", Value::Object(inner)) => {
                    let mut wrapped = Map::new();
                    wrapped.insert(k.clone(), Value::Object(inner));
                    merge(&mut out.root, &wrapped);
                }
                ("weights", Value::Object(inner)) => {
                    for (wk, wv) in inner {
                        out.set(&format!("weights.{wk}"), wv);
                    }
                }
                (_, v) => out.set(&k, v),
            }
        }
        return Ok(out);
    }
    let mut out = Overrides::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.set_pair(line).map_err(|e| ConfigError::Syntax {
            line: i + 1,
            reason: e.to_string(),
        })?;
    }
    Ok(out)
}

impl RunConfig {
    /// Defaults with `overrides` applied, validated.
    pub fn resolve(overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut base = match serde_json::to_value(RunConfig::default())? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        merge(&mut base, &overrides.root);
        let cfg: RunConfig = serde_json::from_value(Value::Object(base)).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.planner.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.follower.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Overrides, ConfigError> {
        parse_config_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn weights(&self) -> &LossWeights {
        &self.planner.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_json_agree() {
        let flat = parse_config_text("# comment\niterations=200\nw_col=1e4\nfollower.stiffness=0.5\ntime_scale=2.0\n").unwrap();
        let json = parse_config_text(r#"{"iterations": 200, "weights": {"w_col": 1e4}, "follower": {"stiffness": 0.5}, "time_scale": 2.0}"#).unwrap();
        let a = RunConfig::resolve(&flat).unwrap();
        let b = RunConfig::resolve(&json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.planner.iterations, 200);
        assert_eq!(a.planner.weights.w_col, 1e4);
        assert_eq!(a.planner.weights.w_dist, LossWeights::default().w_dist);
        assert_eq!(a.follower.stiffness, 0.5);
    }

    #[test]
    fn later_overrides_win() {
        let mut o = parse_config_text("iterations=200").unwrap();
        let mut cli = Overrides::default();
        cli.set_pair("iterations=7").unwrap();
        o.extend(&cli);
        assert_eq!(RunConfig::resolve(&o).unwrap().planner.iterations, 7);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(RunConfig::resolve(&parse_config_text("bogus=1").unwrap()).is_err());
        assert!(RunConfig::resolve(&parse_config_text("n_segments=1").unwrap()).is_err());
        assert!(parse_config_text("no equals sign").is_err());
        let mut o = Overrides::default();
        assert!(o.set_weights("w_foo=1").is_err());
    }

    #[test]
    fn weights_list() {
        let mut o = Overrides::default();
        o.set_weights("w_dist=1,w_time=2").unwrap();
        let c = RunConfig::resolve(&o).unwrap();
        assert_eq!((c.planner.weights.w_dist, c.planner.weights.w_time), (1.0, 2.0));
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::default();
        let text = c.to_json().to_string();
        assert_eq!(RunConfig::resolve(&parse_config_text(&text).unwrap()).unwrap(), c);
    }
}
