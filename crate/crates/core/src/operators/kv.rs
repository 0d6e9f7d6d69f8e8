//! Flat `key = value` configuration records.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvList(pub Vec<(String, String)>);

impl KvList {
    pub fn push(&mut self, key: &str, value: impl Display) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Format(format!("missing config key {key}")))?;
        raw.parse()
            .map_err(|_| Error::Format(format!("config key {key}: cannot parse {raw:?}")))
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parse `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if out.get(k).is_some() {
                return Err(Error::Format(format!("line {}: duplicate key {k}", n + 1)));
            }
            out.0.push((k.to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}
