//! Model input features: MelGCC, SALSA-Lite and SALSA-Mel.
//!
//! Every extractor returns a [`FeatureTensor`] of shape `C x T x B`
//! (channels x frames x bins). For a 4-microphone array and a 2 s window at
//! the default STFT settings the shapes are 10x160x128 (MelGCC),
//! 7x160x191 (SALSA-Lite) and 7x160x128 (SALSA-Mel).

mod container;
mod gcc;
mod nipd;
mod sets;

pub use container::{read_container, read_tensor_file, write_container, write_csv, write_tensor_file, CONTAINER_MAGIC};
pub use gcc::{gcc_phat, GccConfig};
pub use nipd::{nipd, SalsaConfig};
pub use sets::{log_power, mel_gcc, mel_spectrogram, salsa_lite, salsa_mel, FeatureExtractor, LOG_FLOOR};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SeldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    MelGcc,
    SalsaLite,
    SalsaMel,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::MelGcc, FeatureKind::SalsaLite, FeatureKind::SalsaMel];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::MelGcc => "mel-gcc",
            FeatureKind::SalsaLite => "salsa-lite",
            FeatureKind::SalsaMel => "salsa-mel",
        }
    }

    pub(crate) fn code(&self) -> u32 {
        match self {
            FeatureKind::MelGcc => 0,
            FeatureKind::SalsaLite => 1,
            FeatureKind::SalsaMel => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(FeatureKind::MelGcc),
            1 => Some(FeatureKind::SalsaLite),
            2 => Some(FeatureKind::SalsaMel),
            _ => None,
        }
    }

    /// Feature channels produced for an `m`-microphone array.
    pub fn num_channels(&self, m: usize) -> usize {
        match self {
            FeatureKind::MelGcc => m + m * (m - 1) / 2,
            FeatureKind::SalsaLite | FeatureKind::SalsaMel => 2 * m - 1,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = SeldError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mel-gcc" | "melgcc" => Ok(FeatureKind::MelGcc),
            "salsa-lite" | "salsalite" => Ok(FeatureKind::SalsaLite),
            "salsa-mel" | "salsamel" => Ok(FeatureKind::SalsaMel),
            other => Err(SeldError::Config(format!("unknown feature kind '{other}'"))),
        }
    }
}

/// What a single feature plane holds. Microphone indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "role")]
pub enum ChannelRole {
    LogMel { mic: usize },
    LogPower { mic: usize },
    /// Phase difference of `mic` against mic 0, in meters.
    Nipd { mic: usize },
    MelNipd { mic: usize },
    /// Lag axis in samples; positive lag means `j` lags `i`.
    GccPhat { i: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub channels: Vec<ChannelRole>,
    /// Index of lag zero on the bin axis of GCC planes, when present.
    pub zero_lag_index: Option<usize>,
}

impl FeatureLayout {
    /// Rebuilds the layout of a tensor from its kind and shape.
    pub fn infer(kind: FeatureKind, num_channels: usize, num_bins: usize) -> Result<Self> {
        let m = (2..=64)
            .find(|&m| kind.num_channels(m) == num_channels)
            .ok_or_else(|| {
                SeldError::DimensionMismatch(format!("{num_channels} channels is not a valid {kind} stack"))
            })?;
        Ok(Self::for_mics(kind, m, num_bins))
    }

    pub fn for_mics(kind: FeatureKind, m: usize, num_bins: usize) -> Self {
        let mut channels = Vec::with_capacity(kind.num_channels(m));
        match kind {
            FeatureKind::MelGcc => {
                channels.extend((0..m).map(|mic| ChannelRole::LogMel { mic }));
                for i in 0..m {
                    for j in i + 1..m {
                        channels.push(ChannelRole::GccPhat { i, j });
                    }
                }
            }
            FeatureKind::SalsaLite => {
                channels.extend((0..m).map(|mic| ChannelRole::LogPower { mic }));
                channels.extend((1..m).map(|mic| ChannelRole::Nipd { mic }));
            }
            FeatureKind::SalsaMel => {
                channels.extend((0..m).map(|mic| ChannelRole::LogMel { mic }));
                channels.extend((1..m).map(|mic| ChannelRole::MelNipd { mic }));
            }
        }
        let zero_lag_index = (kind == FeatureKind::MelGcc).then(|| (num_bins / 2).saturating_sub(1));
        Self {
            channels,
            zero_lag_index,
        }
    }
}

/// `C x T x B` real feature stack, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    kind: FeatureKind,
    num_channels: usize,
    num_frames: usize,
    num_bins: usize,
    values: Vec<f64>,
    layout: FeatureLayout,
}

impl FeatureTensor {
    pub fn new(
        kind: FeatureKind,
        num_channels: usize,
        num_frames: usize,
        num_bins: usize,
        values: Vec<f64>,
        layout: FeatureLayout,
    ) -> Result<Self> {
        if values.len() != num_channels * num_frames * num_bins {
            return Err(SeldError::DimensionMismatch(format!(
                "{num_channels}x{num_frames}x{num_bins} tensor needs {} values, got {}",
                num_channels * num_frames * num_bins,
                values.len()
            )));
        }
        if layout.channels.len() != num_channels {
            return Err(SeldError::DimensionMismatch(format!(
                "layout describes {} channels, tensor has {num_channels}",
                layout.channels.len()
            )));
        }
        Ok(Self {
            kind,
            num_channels,
            num_frames,
            num_bins,
            values,
            layout,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    /// `(C, T, B)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_channels, self.num_frames, self.num_bins)
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    /// One `T x B` plane.
    pub fn plane(&self, channel: usize) -> &[f64] {
        let size = self.num_frames * self.num_bins;
        &self.values[channel * size..(channel + 1) * size]
    }

    pub fn get(&self, channel: usize, frame: usize, bin: usize) -> f64 {
        self.values[(channel * self.num_frames + frame) * self.num_bins + bin]
    }
}
