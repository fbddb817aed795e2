//! Flat `key = value` configuration format.
//!
//! One assignment per line, `#` starts a comment line, blank lines are
//! ignored. Keys are namespaced with dots (`segmenter.seed = 7`). The parser
//! is strict: duplicate keys and, once a consumer has claimed its keys,
//! unknown ones are errors rather than silent no-ops.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
    /// A structurally valid config that violates a semantic constraint.
    #[error("{0}")]
    Invalid(String),
}

/// Parsed assignments, keyed by the full dotted name. Consumers `take_*`
/// the keys they understand and then call [`FlatConfig::ensure_empty`].
#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    map: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line: idx + 1,
                    msg: "empty key".into(),
                });
            }
            if map
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
        }
        Ok(FlatConfig { map })
    }

    /// Insert or replace an assignment. Used for command line overrides,
    /// which beat file values.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.map.insert(key.to_string(), value.into());
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn take_string(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn take_parsed<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::InvalidValue {
                    key: key.to_string(),
                    msg: format!("`{raw}` is not {what}"),
                }),
        }
    }

    pub fn take_u32(&mut self, key: &str) -> Result<Option<u32>, ConfigError> {
        self.take_parsed(key, "an unsigned integer")
    }

    pub fn take_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.take_parsed(key, "an unsigned integer")
    }

    pub fn take_i32(&mut self, key: &str) -> Result<Option<i32>, ConfigError> {
        self.take_parsed(key, "an integer")
    }

    pub fn take_f32(&mut self, key: &str) -> Result<Option<f32>, ConfigError> {
        self.take_parsed(key, "a number")
    }

    pub fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take_parsed(key, "a number")
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(raw) => match raw.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    msg: format!("`{raw}` is not `true` or `false`"),
                }),
            },
        }
    }

    /// Errors with the first remaining key. Call after all sections have
    /// consumed theirs so typos do not pass silently.
    pub fn ensure_empty(&self) -> Result<(), ConfigError> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
        }
    }
}

/// Renders `(key, value)` pairs in the file format, sorted by key.
pub fn render_flat<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut sorted: Vec<(&str, String)> = pairs.into_iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = String::new();
    for (k, v) in sorted {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}
