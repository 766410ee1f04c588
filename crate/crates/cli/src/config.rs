//! Settings resolution: command-line flag, then config file, then default.
//!
//! Config files are flat `key = value` lines; blank lines and lines starting
//! with `#` are ignored. Keys use the long flag names with `-` or `_`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('-', "_");
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("config line {}: duplicate key {key}", i + 1);
        }
    }
    Ok(out)
}

pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
    /// Keys read but kept out of the manifest hash (output paths, threads).
    local: Vec<String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse_config(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        Ok(Self { file, resolved: BTreeMap::new(), local: Vec::new() })
    }

    fn lookup<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.get(key) {
            Some(v) => v.parse().map(Some).map_err(|e| anyhow!("config key {key}: {e}")),
            None => Ok(None),
        }
    }

    /// Resolves `key` and records the value for the run manifest.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.lookup(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Like [`Settings::get`] with no default.
    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.lookup(key)?.ok_or_else(|| anyhow!("missing required setting --{}", key.replace('_', "-")))?,
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.lookup(key)?,
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    /// Resolves a setting that does not affect results.
    pub fn local<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.local.push(key.to_string());
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.lookup(key),
        }
    }

    /// Fails on config keys no setting asked for.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(k) = self.file.keys().find(|k| !self.resolved.contains_key(*k) && !self.local.contains(k)) {
            bail!("unknown config key {k}");
        }
        Ok(self.resolved)
    }
}

/// SHA-256 of the resolved settings, one `key=value` line each, sorted.
pub fn config_hash(resolved: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in resolved {
        h.update(format!("{k}={v}\n").as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Comma-separated list; `a-b` expands to the inclusive range.
pub fn parse_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..").or_else(|| part.split_once('-')) {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty range {part}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse()?),
        }
    }
    if out.is_empty() {
        bail!("empty list");
    }
    Ok(out)
}
