//! INI-style run configuration.
//!
//! Lines are `key = value`; `[section]` headers prefix the following keys
//! with `section.`, so `[augment]` + `zoom_lo = 0.9` is the same key as a
//! top-level `augment.zoom_lo = 0.9`. `#` and `;` start comment lines.
//! Unknown and repeated keys are errors. Command-line flags override file
//! values, which override the defaults in [`KEYS`].

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {0:?} given twice")]
    DuplicateKey(String),
    #[error("config key {key}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Every recognised key with its default value.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("threads", "1"),
    ("out", "."),
    ("augment.enabled", "true"),
    ("augment.zoom_lo", "0.9"),
    ("augment.zoom_hi", "1.1"),
    ("augment.hist_points", "3"),
    ("augment.hist_mag", "0.1"),
    ("train.epochs", "20"),
    ("train.batch_size", "32"),
    ("train.lr", "0.05"),
    ("train.momentum", "0.9"),
    ("train.input_side", "56"),
    ("model.stage_blocks", "1,1,1"),
    ("model.base_channels", "8"),
    ("synth.sets", "100"),
    ("synth.side", "64"),
    ("synth.marker_prob", "0.193"),
    ("synth.redact_prob", "0.262"),
    ("synth.asymmetry", "0.05"),
    ("synth.noise", "0.02"),
    ("synth.jitter", "1.0"),
    ("split.train", "116"),
    ("split.val", "40"),
    ("split.test", "42"),
    ("preprocess.side", "250"),
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Parses INI text into flat `section.key` entries.
pub fn parse_ini(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: format!("unterminated section header {line:?}"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            reason: format!("expected key = value, got {line:?}"),
        })?;
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if !known(&key) {
            return Err(ConfigError::UnknownKey(key));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(key));
        }
    }
    Ok(out)
}

/// Merged view of defaults, config file and command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn from_ini(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.values.extend(parse_ini(text)?);
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
                    path: p.display().to_string(),
                    reason: e.to_string(),
                })?;
                RunConfig::from_ini(&text)
            }
        }
    }

    /// Applies a command-line override when one was given.
    pub fn set<V: Display>(&mut self, key: &str, value: Option<V>) -> Result<(), ConfigError> {
        if !known(key) {
            return Err(ConfigError::UnknownKey(key.into()));
        }
        if let Some(v) = value {
            self.values.insert(key.into(), v.to_string());
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let value = self.raw(key);
        value.trim().parse().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        })
    }

    pub fn get_bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key).trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => Ok(true),
            "0" | "false" | "no" | "off" => Ok(false),
            v => Err(ConfigError::BadValue {
                key: key.into(),
                value: v.into(),
            }),
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let value = self.raw(key);
        value
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
            })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
