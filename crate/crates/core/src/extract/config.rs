//! Structured training configs (DeepSpeed-style JSON, launcher YAML, TOML).
//!
//! The document is parsed into a generic tree and walked; signal locations
//! are recovered afterwards by searching for the key path in the source
//! text, since none of the parsers report line numbers.

use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use super::catalog::{self, KeyRole};
use crate::signal::{Location, Signal, SignalKind, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigDialect {
    Json,
    Yaml,
    Toml,
}

impl ConfigDialect {
    pub fn from_path(path: &str) -> Option<Self> {
        let ext = Path::new(path).extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "json" => Some(Self::Json),
            "yaml" | "yml" => Some(Self::Yaml),
            "toml" => Some(Self::Toml),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
#[error("{path}: cannot parse {dialect:?} document: {message}")]
pub struct ConfigError {
    pub path: String,
    pub dialect: ConfigDialect,
    pub message: String,
}

fn parse(text: &str, path: &str, dialect: ConfigDialect) -> Result<Value, ConfigError> {
    let err = |message: String| ConfigError {
        path: path.to_string(),
        dialect,
        message,
    };
    match dialect {
        ConfigDialect::Json => serde_json::from_str(text).map_err(|e| err(e.to_string())),
        ConfigDialect::Yaml => {
            if text.trim().is_empty() {
                return Ok(Value::Null);
            }
            serde_yaml::from_str(text).map_err(|e| err(e.to_string()))
        }
        ConfigDialect::Toml => toml::from_str(text).map_err(|e| err(e.to_string())),
    }
}

/// Extracts dtype, ZeRO stage, gradient accumulation, backend, GPU count
/// and `NCCL_*` settings from a config document. The dialect is taken from
/// the path extension (JSON when unknown).
pub fn extract_training_config(text: &str, path: &str) -> Result<Vec<Signal>, ConfigError> {
    let dialect = ConfigDialect::from_path(path).unwrap_or(ConfigDialect::Json);
    extract_with_dialect(text, path, dialect)
}

pub fn extract_with_dialect(
    text: &str,
    path: &str,
    dialect: ConfigDialect,
) -> Result<Vec<Signal>, ConfigError> {
    let doc = parse(text, path, dialect)?;
    let mut walker = Walker {
        locator: Locator::new(text),
        path,
        keys: Vec::new(),
        out: Vec::new(),
    };
    walker.walk(&doc);
    Ok(walker.out)
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn switch_on(v: &Value) -> bool {
    match v {
        Value::Bool(b) => *b,
        Value::String(s) => catalog::is_truthy(s),
        Value::Number(n) => n.as_i64() == Some(1),
        _ => false,
    }
}

struct Walker<'a> {
    locator: Locator<'a>,
    path: &'a str,
    keys: Vec<String>,
    out: Vec<Signal>,
}

impl Walker<'_> {
    fn emit(&mut self, kind: SignalKind, value: String, extra_key: Option<&str>) {
        let mut keys: Vec<&str> = self.keys.iter().map(String::as_str).collect();
        if let Some(k) = extra_key {
            keys.push(k);
        }
        let line = self.locator.line_of(&keys);
        let surface = keys.last().copied().unwrap_or_default().to_string();
        self.out
            .push(Signal::new(kind, value, Tier::Config, Location::new(self.path, line), surface));
    }

    fn walk(&mut self, v: &Value) {
        match v {
            Value::Object(map) => {
                for (key, child) in map {
                    self.keys.push(key.clone());
                    self.visit_entry(key, child);
                    self.walk(child);
                    self.keys.pop();
                }
            }
            Value::Array(items) => {
                for item in items {
                    self.walk(item);
                }
            }
            _ => {}
        }
    }

    fn parent_key(&self) -> Option<String> {
        let n = self.keys.len();
        (n >= 2).then(|| catalog::normalize_key(&self.keys[n - 2]))
    }

    fn visit_entry(&mut self, key: &str, child: &Value) {
        if key.to_ascii_uppercase().starts_with("NCCL_") {
            if let Some(text) = scalar_text(child) {
                for (kind, value) in catalog::classify_env(key, &text) {
                    self.emit(kind, value, None);
                }
            }
            return;
        }
        let normalized = catalog::normalize_key(key);
        if normalized == "stage" && self.parent_key().as_deref() == Some("zero_optimization") {
            if let Some(found) = scalar_text(child).and_then(|t| catalog::interpret(KeyRole::ZeroStage, &t)) {
                self.emit(found.0, found.1, None);
            }
            return;
        }
        match catalog::key_role(&normalized) {
            Some(KeyRole::PrecisionSwitch(dtype)) => match child {
                Value::Object(section) => {
                    let enabled = section
                        .iter()
                        .find(|(k, _)| k.eq_ignore_ascii_case("enabled"));
                    if let Some((k, v)) = enabled {
                        if switch_on(v) {
                            let k = k.clone();
                            self.emit(SignalKind::DtypeConfig, dtype.to_string(), Some(&k));
                        }
                    }
                }
                v if switch_on(v) => self.emit(SignalKind::DtypeConfig, dtype.to_string(), None),
                _ => {}
            },
            Some(role) => {
                if let Some(found) = scalar_text(child).and_then(|t| catalog::interpret(role, &t)) {
                    self.emit(found.0, found.1, None);
                }
            }
            None => {}
        }
    }
}

/// Finds the line of a key path by searching for each key in turn.
struct Locator<'a> {
    text: &'a str,
}

fn is_key_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl<'a> Locator<'a> {
    fn new(text: &'a str) -> Self {
        Self { text }
    }

    fn find_token(&self, key: &str, from: usize) -> Option<usize> {
        if key.is_empty() {
            return None;
        }
        let mut start = from;
        while let Some(rel) = self.text.get(start..)?.find(key) {
            let at = start + rel;
            let end = at + key.len();
            let before_ok = self.text[..at].chars().next_back().is_none_or(|c| !is_key_char(c));
            let after_ok = self.text[end..].chars().next().is_none_or(|c| !is_key_char(c));
            if before_ok && after_ok {
                return Some(at);
            }
            start = at + key.chars().next().map_or(1, char::len_utf8);
        }
        None
    }

    fn line_of(&self, keys: &[&str]) -> u32 {
        let mut offset = 0;
        let mut found = None;
        for key in keys {
            if let Some(at) = self.find_token(key, offset) {
                found = Some(at);
                offset = at + key.len();
            }
        }
        // The last key must be the one the line is reported for.
        if let Some(last) = keys.last() {
            let last_hit = found.filter(|at| self.text[*at..].starts_with(last));
            found = last_hit.or_else(|| self.find_token(last, 0));
        }
        found.map_or(1, |at| self.text[..at].matches('\n').count() as u32 + 1)
    }
}
