//! Plain-text scenario configs: dotted `key = value` lines, `#` comments.
//! No markup dependency, so any implementation language can parse the same
//! files byte for byte.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let eq = line.find('=').ok_or_else(|| {
                Error::config(idx + 1, format!("expected `key = value`, got `{line}`"))
            })?;
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::config(idx + 1, format!("bad key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::config(idx + 1, format!("empty value for `{key}`")));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::config(idx + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Config { entries })
    }

    /// Canonical form: sorted `key = value` lines. parse . serialize is
    /// idempotent, which is the config round-trip contract.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::missing_key(key))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::config(0, format!("key {key}: bad number `{raw}`")))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::config(0, format!("key {key}: bad integer `{raw}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::config(0, format!("key {key}: bad number `{raw}`"))),
        }
    }

    pub fn get_u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::config(0, format!("key {key}: bad integer `{raw}`"))),
        }
    }

    pub fn get_usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::config(0, format!("key {key}: bad integer `{raw}`"))),
        }
    }

    pub fn get_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    /// `on`/`off` (also accepts true/false).
    pub fn get_switch_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("on") | Some("true") => Ok(true),
            Some("off") | Some("false") => Ok(false),
            Some(other) => Err(Error::config(
                0,
                format!("key {key}: expected on|off, got `{other}`"),
            )),
        }
    }
}
