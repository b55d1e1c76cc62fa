use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::AppConfig;
use crate::error::{Result, SeldError};

/// Record written next to every output so a run can be repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: AppConfig,
    /// Command-specific settings not covered by `config` (backend spec,
    /// simulated direction, ...).
    #[serde(default)]
    pub settings: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub(crate) fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: &AppConfig, started_unix_ms: u128) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            settings: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms,
            finished_unix_ms: started_unix_ms,
        }
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_next_to(&mut self, output: &Path) -> Result<PathBuf> {
        self.finished_unix_ms = now_ms();
        let path = Self::path_for(output);
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| SeldError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("features.sft");
        let mut m = RunManifest::new("extract", &AppConfig::default(), now_ms());
        m.inputs.push("in.wav".into());
        m.outputs.push(out.clone());
        let path = m.write_next_to(&out).unwrap();
        assert!(path.to_string_lossy().ends_with("features.sft.manifest.json"));
        assert_eq!(RunManifest::read(&path).unwrap(), m);
    }
}
