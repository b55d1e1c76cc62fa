use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::MultichannelAudio;
use crate::error::{Result, SeldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub fft_size: usize,
    pub win_length: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            win_length: 512,
            hop: 300,
            sample_rate_hz: 24_000,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(SeldError::InvalidRange(format!(
                "fft size {} is not a power of two",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.win_length || self.win_length > self.fft_size {
            return Err(SeldError::InvalidRange(format!(
                "need 0 < hop ({}) <= window ({}) <= fft ({})",
                self.hop, self.win_length, self.fft_size
            )));
        }
        if self.sample_rate_hz == 0 {
            return Err(SeldError::InvalidRange("sample rate must be positive".into()));
        }
        Ok(())
    }

    /// One-sided bin count, `fft_size / 2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for `num_samples` input samples: `ceil(N / hop)`.
    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_samples.div_ceil(self.hop)
    }

    pub fn bin_frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate_hz as f64 / self.fft_size as f64
    }

    pub fn frame_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate_hz as f64
    }
}

/// Periodic Hann window of `len` samples.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / len as f64).cos())
        .collect()
}

/// `M x T x F` complex STFT values, channel-major then frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    values: Vec<Complex64>,
    num_channels: usize,
    num_frames: usize,
    config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn from_values(
        values: Vec<Complex64>,
        num_channels: usize,
        num_frames: usize,
        config: StftConfig,
    ) -> Result<Self> {
        let expected = num_channels * num_frames * config.num_bins();
        if values.len() != expected {
            return Err(SeldError::DimensionMismatch(format!(
                "spectrogram needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            num_channels,
            num_frames,
            config,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.config.num_bins()
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// All frames of one channel, `T x F` row-major.
    pub fn channel(&self, ch: usize) -> &[Complex64] {
        let plane = self.num_frames * self.num_bins();
        &self.values[ch * plane..(ch + 1) * plane]
    }

    pub fn frame(&self, ch: usize, t: usize) -> &[Complex64] {
        let f = self.num_bins();
        &self.channel(ch)[t * f..(t + 1) * f]
    }

    pub fn get(&self, ch: usize, t: usize, f: usize) -> Complex64 {
        self.frame(ch, t)[f]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `|X|^2` of one channel, `T x F` row-major.
    pub fn power(&self, ch: usize) -> Vec<f64> {
        self.channel(ch).iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Planned short-time Fourier transform. Immutable after construction and
/// shareable across threads.
#[derive(Clone)]
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Stft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stft").field("config", &self.config).finish()
    }
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        // a shorter window sits centered inside the FFT frame
        let mut window = vec![0.0; config.fft_size];
        let offset = (config.fft_size - config.win_length) / 2;
        window[offset..offset + config.win_length].copy_from_slice(&hann_periodic(config.win_length));
        let fft = FftPlanner::new().plan_fft_forward(config.fft_size);
        Ok(Self { config, window, fft })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Center-padded (reflect) STFT: frame `t` is centered on sample `t * hop`,
    /// giving `ceil(N / hop)` frames.
    pub fn process(&self, audio: &MultichannelAudio) -> Result<ComplexSpectrogram> {
        let n = audio.num_samples();
        if n == 0 {
            return Err(SeldError::EmptyInput);
        }
        if audio.format().sample_rate_hz != self.config.sample_rate_hz {
            return Err(SeldError::SampleRateMismatch {
                expected: self.config.sample_rate_hz,
                found: audio.format().sample_rate_hz,
            });
        }
        let frames = self.config.num_frames(n);
        let bins = self.config.num_bins();
        let size = self.config.fft_size;
        let half = (size / 2) as isize;

        let mut values = Vec::with_capacity(audio.num_channels() * frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for ch in audio.channels() {
            for t in 0..frames {
                let start = (t * self.config.hop) as isize - half;
                for (i, (dst, w)) in buf.iter_mut().zip(&self.window).enumerate() {
                    let idx = reflect_index(start + i as isize, n);
                    *dst = Complex64::new(ch[idx] * w, 0.0);
                }
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                values.extend_from_slice(&buf[..bins]);
            }
        }
        ComplexSpectrogram::from_values(values, audio.num_channels(), frames, self.config)
    }
}

/// Maps any integer index onto `[0, n)` by mirror reflection without
/// repeating the edge sample (numpy "reflect").
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let r = i.rem_euclid(period);
    if r < n as isize {
        r as usize
    } else {
        (period - r) as usize
    }
}

pub fn stft(audio: &MultichannelAudio, config: StftConfig) -> Result<ComplexSpectrogram> {
    Stft::new(config)?.process(audio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{white_noise, AudioFormat};

    fn mono(samples: Vec<f64>) -> MultichannelAudio {
        MultichannelAudio::from_channels(24_000, vec![samples]).unwrap()
    }

    /// Direct O(N^2) DFT of one windowed frame.
    fn naive_dft(frame: &[f64]) -> Vec<Complex64> {
        let n = frame.len();
        (0..n / 2 + 1)
            .map(|k| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        Complex64::from_polar(x, -std::f64::consts::TAU * (k * i) as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn reflect_matches_numpy() {
        // np.pad([0,1,2,3], 3, 'reflect') -> [3,2,1,0,1,2,3,2,1,0]
        let got: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn frame_counts() {
        let cfg = StftConfig::default();
        for (n, t) in [(1, 1), (299, 1), (300, 1), (48_000, 160), (48_001, 161)] {
            assert_eq!(cfg.num_frames(n), t);
            let spec = stft(&mono(white_noise(n, 0.5, 1)), cfg).unwrap();
            assert_eq!(spec.num_frames(), t, "N={n}");
            assert_eq!(spec.num_bins(), 257);
        }
    }

    #[test]
    fn silence_is_zero() {
        let audio = MultichannelAudio::silence(AudioFormat::default(), 4800);
        let spec = stft(&audio, StftConfig::default()).unwrap();
        assert!(spec.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn empty_input_errors() {
        let audio = MultichannelAudio::silence(AudioFormat::default(), 0);
        assert!(matches!(stft(&audio, StftConfig::default()), Err(SeldError::EmptyInput)));
    }

    #[test]
    fn bin_centered_tone_peaks_at_its_bin() {
        let cfg = StftConfig::default();
        let k = 37;
        let f = cfg.bin_frequency_hz(k);
        let x: Vec<f64> = (0..12_000)
            .map(|n| (std::f64::consts::TAU * f * n as f64 / 24_000.0).cos())
            .collect();
        let spec = stft(&mono(x.clone()), cfg).unwrap();
        let w = hann_periodic(512);
        for t in 2..spec.num_frames() - 2 {
            let frame = spec.frame(0, t);
            let argmax = (0..frame.len())
                .max_by(|&a, &b| frame[a].norm().partial_cmp(&frame[b].norm()).unwrap())
                .unwrap();
            assert_eq!(argmax, k);
            // the FFT agrees with a direct DFT of the same windowed frame
            let start = t * 300 - 256;
            let windowed: Vec<f64> = (0..512).map(|i| x[start + i] * w[i]).collect();
            let direct = naive_dft(&windowed);
            for (a, b) in frame.iter().zip(&direct) {
                assert!((a - b).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn parseval_on_interior_frame() {
        let cfg = StftConfig::default();
        let x = white_noise(6000, 0.5, 4);
        let spec = stft(&mono(x.clone()), cfg).unwrap();
        let w = hann_periodic(512);
        let t = 7;
        let start = t * 300 - 256;
        let time_energy: f64 = (0..512).map(|i| (x[start + i] * w[i]).powi(2)).sum();
        let frame = spec.frame(0, t);
        // one-sided spectrum: interior bins count twice
        let freq_energy: f64 = frame
            .iter()
            .enumerate()
            .map(|(k, z)| if k == 0 || k == 256 { z.norm_sqr() } else { 2.0 * z.norm_sqr() })
            .sum::<f64>()
            / 512.0;
        assert!((freq_energy - time_energy).abs() / time_energy < 1e-6);
    }

    #[test]
    fn stft_is_linear() {
        let cfg = StftConfig::default();
        let x = white_noise(3000, 0.5, 1);
        let y = white_noise(3000, 0.5, 2);
        let (a, b) = (0.7, -1.3);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let sx = stft(&mono(x), cfg).unwrap();
        let sy = stft(&mono(y), cfg).unwrap();
        let sm = stft(&mono(mix), cfg).unwrap();
        for ((m, p), q) in sm.values().iter().zip(sx.values()).zip(sy.values()) {
            assert!((m - (p * a + q * b)).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = StftConfig { fft_size: 500, ..StftConfig::default() };
        assert!(bad.validate().is_err());
        let bad = StftConfig { hop: 600, ..StftConfig::default() };
        assert!(bad.validate().is_err());
    }
}
