use serde::{Deserialize, Serialize};

use crate::audio::DEFAULT_SPEED_OF_SOUND;
use crate::dsp::ComplexSpectrogram;
use crate::error::{Result, SeldError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SalsaConfig {
    /// Linear bins kept for SALSA-Lite (bins `0..cutoff_bins`).
    pub cutoff_bins: usize,
    pub speed_of_sound: f64,
    pub log_floor: f64,
    /// Symmetric clip applied to NIPD values (meters). Off when `None`.
    pub nipd_clip_m: Option<f64>,
}

impl Default for SalsaConfig {
    fn default() -> Self {
        Self {
            cutoff_bins: 191,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            log_floor: super::LOG_FLOOR,
            nipd_clip_m: None,
        }
    }
}

impl SalsaConfig {
    pub fn validate(&self, num_bins: usize) -> Result<()> {
        if self.cutoff_bins == 0 || self.cutoff_bins > num_bins {
            return Err(SeldError::InvalidRange(format!(
                "cutoff {} outside 1..={num_bins}",
                self.cutoff_bins
            )));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(SeldError::InvalidRange("speed of sound must be positive".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(SeldError::InvalidRange("log floor must be positive".into()));
        }
        if let Some(clip) = self.nipd_clip_m {
            if !(clip > 0.0) {
                return Err(SeldError::InvalidRange("NIPD clip must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Normalized interchannel phase differences against channel 0,
/// `(M-1) x T x cutoff_bins`, in meters. Bin 0 carries no delay
/// information and is defined as 0.
pub fn nipd(spec: &ComplexSpectrogram, config: &SalsaConfig) -> Result<Vec<f64>> {
    config.validate(spec.num_bins())?;
    nipd_bins(spec, config, config.cutoff_bins)
}

pub(crate) fn nipd_bins(spec: &ComplexSpectrogram, config: &SalsaConfig, bins: usize) -> Result<Vec<f64>> {
    let m = spec.num_channels();
    if m < 2 {
        return Err(SeldError::TooFewChannels(m));
    }
    let frames = spec.num_frames();
    let stft_cfg = spec.config();
    // -c / (2 pi f) per bin, 0 at DC
    let scale: Vec<f64> = (0..bins)
        .map(|f| {
            if f == 0 {
                0.0
            } else {
                -config.speed_of_sound / (std::f64::consts::TAU * stft_cfg.bin_frequency_hz(f))
            }
        })
        .collect();

    let mut out = Vec::with_capacity((m - 1) * frames * bins);
    for ch in 1..m {
        for t in 0..frames {
            let (reference, target) = (spec.frame(0, t), spec.frame(ch, t));
            for f in 0..bins {
                let cross = target[f] * reference[f].conj();
                let mut v = scale[f] * cross.im.atan2(cross.re);
                if let Some(clip) = config.nipd_clip_m {
                    v = v.clamp(-clip, clip);
                }
                out.push(v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{white_noise, MultichannelAudio};
    use crate::dsp::{stft, StftConfig};

    fn spec_of(channels: Vec<Vec<f64>>) -> ComplexSpectrogram {
        stft(&MultichannelAudio::from_channels(24_000, channels).unwrap(), StftConfig::default()).unwrap()
    }

    #[test]
    fn identical_channels_are_exactly_zero() {
        let x = white_noise(4800, 0.5, 2);
        let spec = spec_of(vec![x.clone(), x.clone(), x]);
        let v = nipd(&spec, &SalsaConfig::default()).unwrap();
        assert_eq!(v.len(), 2 * spec.num_frames() * 191);
        assert!(v.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn dc_bin_is_zero() {
        let spec = spec_of(vec![white_noise(4800, 0.5, 2), white_noise(4800, 0.5, 3)]);
        let v = nipd(&spec, &SalsaConfig::default()).unwrap();
        for t in 0..spec.num_frames() {
            assert_eq!(v[t * 191], 0.0);
        }
    }

    #[test]
    fn swapping_reference_negates() {
        let x = white_noise(7200, 0.5, 8);
        let a = x[1..].to_vec();
        let b = x[..7199].to_vec();
        let forward = nipd(&spec_of(vec![a.clone(), b.clone()]), &SalsaConfig::default()).unwrap();
        let backward = nipd(&spec_of(vec![b, a]), &SalsaConfig::default()).unwrap();
        let cfg = StftConfig::default();
        for (idx, (p, q)) in forward.iter().zip(&backward).enumerate() {
            let f = idx % 191;
            // the arg branch cut at +-pi is the only asymmetric case
            if f > 0 && p.abs() < 0.999 * 343.0 / (2.0 * cfg.bin_frequency_hz(f)) {
                assert!((p + q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn clip_bounds_values() {
        let spec = spec_of(vec![white_noise(4800, 0.5, 2), white_noise(4800, 0.5, 3)]);
        let cfg = SalsaConfig { nipd_clip_m: Some(0.168), ..SalsaConfig::default() };
        let v = nipd(&spec, &cfg).unwrap();
        assert!(v.iter().all(|p| p.abs() <= 0.168));
        assert!(v.iter().any(|p| p.abs() == 0.168));
    }

    #[test]
    fn cutoff_beyond_spectrum_is_rejected() {
        let spec = spec_of(vec![vec![0.0; 600]; 2]);
        let cfg = SalsaConfig { cutoff_bins: 258, ..SalsaConfig::default() };
        assert!(nipd(&spec, &cfg).is_err());
    }
}
