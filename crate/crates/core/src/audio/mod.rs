//! Multichannel audio ingestion: WAV files, the capture ring buffer, a
//! simulated capture device and a far-field plane-wave scene simulator.

mod capture;
mod geometry;
mod ring;
mod simulate;
mod wav;

pub use capture::SimulatedCapture;
pub use geometry::{ArrayGeometry, DEFAULT_SPEED_OF_SOUND, DEFAULT_TETRA_D_MAX};
pub use ring::{AudioBlock, BlockRingBuffer, SharedRingBuffer};
pub use simulate::{simulate_plane_wave, white_noise};
pub use wav::{read_wav, write_wav, SampleEncoding};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SeldError};

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 24_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioFormat {
    pub sample_rate_hz: u32,
    pub num_channels: usize,
}

impl AudioFormat {
    pub fn new(sample_rate_hz: u32, num_channels: usize) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(SeldError::InvalidRange("sample rate must be positive".into()));
        }
        if num_channels == 0 {
            return Err(SeldError::InvalidRange("channel count must be positive".into()));
        }
        Ok(Self {
            sample_rate_hz,
            num_channels,
        })
    }

    /// Number of samples per channel in `seconds` of audio, rounded to the
    /// nearest sample.
    pub fn samples_for(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate_hz as f64).round() as usize
    }
}

impl Default for AudioFormat {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            num_channels: 4,
        }
    }
}

/// An `M x N` buffer of normalized samples, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelAudio {
    format: AudioFormat,
    channels: Vec<Vec<f64>>,
}

impl MultichannelAudio {
    pub fn from_channels(sample_rate_hz: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        let format = AudioFormat::new(sample_rate_hz, channels.len())?;
        let len = channels[0].len();
        if let Some(bad) = channels.iter().find(|c| c.len() != len) {
            return Err(SeldError::DimensionMismatch(format!(
                "channels have unequal lengths ({} vs {})",
                len,
                bad.len()
            )));
        }
        Ok(Self { format, channels })
    }

    pub fn silence(format: AudioFormat, num_samples: usize) -> Self {
        Self {
            format,
            channels: vec![vec![0.0; num_samples]; format.num_channels],
        }
    }

    pub fn format(&self) -> AudioFormat {
        self.format
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.num_samples() as f64 / self.format.sample_rate_hz as f64
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            let ch = self.channels.get(i).ok_or_else(|| {
                SeldError::InvalidRange(format!("channel {i} out of {}", self.num_channels()))
            })?;
            out.push(ch.clone());
        }
        Self::from_channels(self.format.sample_rate_hz, out)
    }

    /// Samples `[start, start + len)` of every channel.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.num_samples() {
            return Err(SeldError::InvalidRange(format!(
                "slice {start}..{} exceeds {} samples",
                start + len,
                self.num_samples()
            )));
        }
        let channels = self
            .channels
            .iter()
            .map(|c| c[start..start + len].to_vec())
            .collect();
        Ok(Self {
            format: self.format,
            channels,
        })
    }

    /// Concatenates buffers in time order. All parts must share a format.
    pub fn concat(parts: &[&MultichannelAudio]) -> Result<Self> {
        let first = parts.first().ok_or(SeldError::EmptyInput)?;
        let format = first.format;
        let total: usize = parts.iter().map(|p| p.num_samples()).sum();
        let mut channels = vec![Vec::with_capacity(total); format.num_channels];
        for part in parts {
            if part.format != format {
                return Err(SeldError::DimensionMismatch(
                    "cannot concatenate audio with different formats".into(),
                ));
            }
            for (dst, src) in channels.iter_mut().zip(&part.channels) {
                dst.extend_from_slice(src);
            }
        }
        Ok(Self { format, channels })
    }

    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            format: self.format,
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|s| s * gain).collect())
                .collect(),
        }
    }
}
