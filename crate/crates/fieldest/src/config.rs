//! Flat key-value configuration files.
//!
//! The on-disk format is one `key = value` pair per line with `#` comments
//! and blank lines ignored. Keys are flat dotted paths (`train.lr`,
//! `grid.nx`); there is no nesting or quoting. Example:
//!
//! ```text
//! # neighbors per covariate row
//! m = 10
//! grid.nx = 50      # cells west to east
//! value_scaling = on
//! ```
//!
//! Parsing is two-phase: [`ConfigMap::parse`] validates the syntax, then
//! consumers pull typed values out with the `take_*` methods and call
//! [`ConfigMap::finish`], which rejects any keys nothing consumed — so a
//! misspelled key is an error instead of a silent fallback to defaults.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
struct RawValue {
    text: String,
    line: usize,
}

/// Parsed configuration entries, consumed key by key.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, RawValue>,
}

impl ConfigMap {
    /// Parse configuration text.
    ///
    /// # Errors
    ///
    /// Malformed lines (no `=`, empty key or value) and duplicate keys are
    /// configuration errors naming the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, RawValue> = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            // Strip comments, then surrounding whitespace.
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {line}: expected 'key = value', got {content:?}"
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {line}: empty key")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!(
                    "line {line}: key '{key}' has no value"
                )));
            }
            if let Some(prev) = entries.get(key) {
                return Err(Error::Config(format!(
                    "line {line}: key '{key}' already set on line {}",
                    prev.line
                )));
            }
            entries.insert(
                key.to_string(),
                RawValue {
                    text: value.to_string(),
                    line,
                },
            );
        }
        Ok(Self { entries })
    }

    /// Remove and return a key's raw text value, if present.
    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|v| v.text)
    }

    fn take_parsed<V>(
        &mut self,
        key: &str,
        what: &str,
        parse: impl Fn(&str) -> Option<V>,
    ) -> Result<Option<V>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => parse(&raw.text).map(Some).ok_or_else(|| {
                Error::Config(format!(
                    "line {}: key '{key}' expects {what}, got {:?}",
                    raw.line, raw.text
                ))
            }),
        }
    }

    /// Remove and parse a floating-point value.
    pub fn take_scalar<T: Scalar>(&mut self, key: &str) -> Result<Option<T>> {
        self.take_parsed(key, "a number", |s| serde_json::from_str::<T>(s).ok())
    }

    /// Remove and parse a non-negative integer.
    pub fn take_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take_parsed(key, "a non-negative integer", |s| s.parse().ok())
    }

    /// Remove and parse an unsigned 64-bit integer (seeds).
    pub fn take_u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.take_parsed(key, "a non-negative integer", |s| s.parse().ok())
    }

    /// Remove and parse a switch: `on`/`off`/`true`/`false`.
    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.take_parsed(key, "on/off", |s| match s {
            "on" | "true" => Some(true),
            "off" | "false" => Some(false),
            _ => None,
        })
    }

    /// Fail if any keys were never consumed (misspelled or unsupported).
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let leftover: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| format!("'{k}' (line {})", v.line))
            .collect();
        Err(Error::Config(format!(
            "unknown configuration keys: {}",
            leftover.join(", ")
        )))
    }
}
