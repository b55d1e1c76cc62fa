//! JSON-configurable settings shared by the CLI and the C interface.
//!
//! Every field has a default, so a config file only needs the keys it
//! changes:
//!
//! ```json
//! {
//!   "audio": { "sample_rate_hz": 24000, "num_channels": 4 },
//!   "features": {
//!     "stft": { "fft_size": 512, "win_length": 512, "hop": 300 },
//!     "mel_bands": 128,
//!     "salsa": { "cutoff_bins": 191, "nipd_clip_m": null },
//!     "geometry": { "speed_of_sound": 343.0 }
//!   },
//!   "pipeline": {
//!     "block_seconds": 1.0, "blocks_per_window": 2, "kind": "salsa-lite",
//!     "decode": { "threshold": 0.5, "merge_angle_deg": 15.0 }
//!   },
//!   "metrics": { "spatial_threshold_deg": 20.0 },
//!   "sweep": { "iterations": 1000, "seed": 0 }
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::{ArrayGeometry, AudioFormat};
use crate::dsp::{MelFilterbank, StftConfig};
use crate::error::{Result, SeldError};
use crate::features::{FeatureExtractor, GccConfig, SalsaConfig};
use crate::metrics::DEFAULT_SPATIAL_THRESHOLD_DEG;
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    pub stft: StftConfig,
    /// Mel band count; also the GCC-PHAT lag count.
    pub mel_bands: usize,
    pub mel_f_min_hz: f64,
    /// Upper mel edge; `None` means Nyquist.
    pub mel_f_max_hz: Option<f64>,
    pub salsa: SalsaConfig,
    pub geometry: ArrayGeometry,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            mel_bands: 128,
            mel_f_min_hz: 0.0,
            mel_f_max_hz: None,
            salsa: SalsaConfig::default(),
            geometry: ArrayGeometry::default(),
        }
    }
}

impl FeatureSettings {
    pub fn build(&self) -> Result<FeatureExtractor> {
        let f_max = self.mel_f_max_hz.unwrap_or(self.stft.sample_rate_hz as f64 / 2.0);
        let bank = MelFilterbank::new(&self.stft, self.mel_bands, self.mel_f_min_hz, f_max)?;
        let geometry = ArrayGeometry::new(self.geometry.mic_positions().to_vec(), self.geometry.speed_of_sound())?;
        let gcc = GccConfig {
            geometry,
            num_lags: self.mel_bands,
        };
        FeatureExtractor::new(self.stft, bank, gcc, self.salsa.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSettings {
    pub spatial_threshold_deg: f64,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        Self {
            spatial_threshold_deg: DEFAULT_SPATIAL_THRESHOLD_DEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { iterations: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub audio: AudioFormat,
    pub features: FeatureSettings,
    pub pipeline: PipelineConfig,
    pub metrics: MetricsSettings,
    pub sweep: SweepSettings,
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SeldError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| SeldError::Config(format!("{}: {e}", path.display())))
    }

    /// Cross-field checks that single-struct validation cannot see.
    pub fn validate(&self) -> Result<()> {
        if self.audio.sample_rate_hz != self.features.stft.sample_rate_hz {
            return Err(SeldError::Config(format!(
                "audio sample rate {} differs from STFT sample rate {}",
                self.audio.sample_rate_hz, self.features.stft.sample_rate_hz
            )));
        }
        if self.audio.num_channels != self.features.geometry.num_mics() {
            return Err(SeldError::Config(format!(
                "{} audio channels but the array has {} microphones",
                self.audio.num_channels,
                self.features.geometry.num_mics()
            )));
        }
        AudioFormat::new(self.audio.sample_rate_hz, self.audio.num_channels)?;
        let g = &self.features.geometry;
        ArrayGeometry::new(g.mic_positions().to_vec(), g.speed_of_sound())?;
        self.pipeline.validate()?;
        if !(0.0..=180.0).contains(&self.metrics.spatial_threshold_deg) {
            return Err(SeldError::Config("spatial threshold must be in [0, 180]".into()));
        }
        Ok(())
    }
}
