//! Line-based `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! case-sensitive; later assignments override earlier ones.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("key {key:?}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            entries.insert(key.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.clone(),
            }),
        }
    }

    /// Overwrites `slot` if `key` is present.
    pub fn apply<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn merge(&mut self, other: &KeyValueConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Rejects keys that are not under any of the given prefixes.
    pub fn check_prefixes(&self, prefixes: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !prefixes.iter().any(|p| k.starts_with(p))) {
            Some(k) => Err(ConfigError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }
}

impl fmt::Display for KeyValueConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let cfg = KeyValueConfig::parse("# comment\n a = 1.5 \n\nb=x\na = 2\n").unwrap();
        assert_eq!(cfg.get::<f64>("a").unwrap(), Some(2.0));
        assert_eq!(cfg.get::<String>("b").unwrap().as_deref(), Some("x"));
        assert_eq!(cfg.get::<f64>("missing").unwrap(), None);
        assert!(cfg.get::<f64>("b").is_err());
        let mut slot = 0.0;
        cfg.apply("a", &mut slot).unwrap();
        assert_eq!(slot, 2.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(KeyValueConfig::parse("novalue"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(KeyValueConfig::parse(" = 3"), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn display_round_trips() {
        let cfg = KeyValueConfig::parse("x = 1\ny = two\n").unwrap();
        assert_eq!(KeyValueConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }
}
