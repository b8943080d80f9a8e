//! `run_manifest.txt`: what ran, with which resolved settings, reading and writing what.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config_error;
use crate::store::write_text;

pub const MANIFEST: &str = "run_manifest.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub duration_seconds: f64,
    /// Absolute input paths.
    pub inputs: Vec<String>,
    /// Output paths relative to the run directory.
    pub outputs: Vec<String>,
    /// The command's fully resolved settings; enough to repeat the run.
    pub config: toml::Table,
    /// Headline numbers for humans; never read back.
    #[serde(default)]
    pub results: toml::Table,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        let config = match toml::Value::try_from(config)? {
            toml::Value::Table(t) => t,
            other => {
                return Err(anyhow::anyhow!(
                    "settings serialize to {}, not a table",
                    other.type_str()
                ))
            }
        };
        Ok(Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            duration_seconds: 0.0,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            results: toml::Table::new(),
        })
    }

    pub fn settings<C: DeserializeOwned>(&self) -> Result<C> {
        toml::Value::Table(self.config.clone())
            .try_into()
            .map_err(|e| config_error(format!("manifest settings for `{}`: {e}", self.command)))
    }

    pub fn result(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.results.insert(key.into(), value.into());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self)?;
        write_text(
            &dir.join(MANIFEST),
            &format!("# coastseg run manifest\n{text}"),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }
}

/// Absolute form of an input path, for manifests that are replayed from elsewhere.
pub fn absolute(path: &Path) -> Result<String> {
    let abs =
        std::fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))?;
    Ok(abs.to_string_lossy().into_owned())
}
