//! Flat `key = value` text with `[section]` headers.
//!
//! Used for run configuration files, resolved-config snapshots and the
//! config block inside checkpoints. Lines starting with `#` or `;` are
//! comments. Keys appearing before any header belong to the unnamed section.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
            }
            if doc.get(&section, key).is_some() {
                return Err(Error::Parse(format!(
                    "line {}: duplicate key {}",
                    lineno + 1,
                    qualified(&section, key)
                )));
            }
            doc.set(&section, key, value.trim());
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, entries)| entries.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    /// Inserts or replaces, keeping first-seen order of sections and keys.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let value = value.into();
        let idx = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[idx].1;
        match entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => entries.push((key.to_string(), value)),
        }
    }

    /// Applies a `section.key=value` override.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {spec:?} is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .rsplit_once('.')
            .ok_or_else(|| Error::Config(format!("override {spec:?} is not section.key=value")))?;
        self.set(section, key, value.trim());
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.sections
            .iter()
            .flat_map(|(s, e)| e.iter().map(move |(k, v)| (s.as_str(), k.as_str(), v.as_str())))
    }

    pub fn reader(&self) -> KvReader<'_> {
        KvReader {
            doc: self,
            used: Vec::new(),
        }
    }
}

impl std::fmt::Display for KvDoc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        for (i, (section, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            if !section.is_empty() {
                let _ = writeln!(out, "[{section}]");
            }
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        f.write_str(&out)
    }
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Typed access that remembers which keys were read, so leftovers can be
/// reported as unknown.
pub struct KvReader<'a> {
    doc: &'a KvDoc,
    used: Vec<(String, String)>,
}

impl KvReader<'_> {
    pub fn raw(&mut self, section: &str, key: &str) -> Option<&str> {
        let v = self.doc.get(section, key)?;
        self.used.push((section.to_string(), key.to_string()));
        Some(v)
    }

    pub fn get<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("invalid value {v:?} for {}", qualified(section, key)))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T> {
        self.get(section, key)?
            .ok_or_else(|| Error::Config(format!("missing required key {}", qualified(section, key))))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|_| {
                        Error::Config(format!("invalid list item {s:?} in {}", qualified(section, key)))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Fails on any key that was never read.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<String> = self
            .doc
            .entries()
            .filter(|(s, k, _)| !self.used.iter().any(|(us, uk)| us == s && uk == k))
            .map(|(s, k, _)| qualified(s, k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

pub fn join_list<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
