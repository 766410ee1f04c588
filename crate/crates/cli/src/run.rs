//! Per-invocation state: resolved settings, the output directory and the
//! run manifest written last.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{config_hash, Settings};
use crate::Common;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
struct RunManifest<'a> {
    /// Bumped when any JSON output changes shape.
    schema: u32,
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a BTreeMap<String, String>,
    config_hash: String,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` wins over the clock.
    timestamp: u64,
    outputs: Vec<String>,
}

pub struct Run {
    command: &'static str,
    pub settings: Settings,
    resolved: Option<BTreeMap<String, String>>,
    pub out: PathBuf,
    pub seed: u64,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(command: &'static str, common: &Common) -> Result<Self> {
        let mut settings = Settings::load(common.config.as_deref())?;
        let seed = settings.get("seed", common.seed, 0u64)?;
        let out = settings.local("out", common.out.clone())?.unwrap_or_else(|| PathBuf::from("out").join(command));
        if let Some(n) = settings.local::<usize>("threads", common.threads)? {
            // Fails only if a pool already exists, which is harmless.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(Self { command, settings, resolved: None, out, seed, outputs: Vec::new() })
    }

    /// Call once every setting is resolved; rejects unknown config keys and
    /// creates the output directory.
    pub fn freeze(&mut self) -> Result<()> {
        let settings = std::mem::replace(&mut self.settings, Settings::load(None)?);
        self.resolved = Some(settings.finish()?);
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Notes a file written into the output directory by other code.
    pub fn record(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.record(name);
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn finish(mut self) -> Result<()> {
        let resolved = self.resolved.take().expect("freeze() before finish()");
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        self.outputs.sort();
        self.outputs.dedup();
        let manifest = RunManifest {
            command: self.command,
            schema: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config: &resolved,
            config_hash: config_hash(&resolved),
            timestamp,
            outputs: std::mem::take(&mut self.outputs),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.path(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
