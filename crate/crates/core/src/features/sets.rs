use super::gcc::{gcc_phat, GccConfig};
use super::nipd::{nipd_bins, SalsaConfig};
use super::{FeatureKind, FeatureLayout, FeatureTensor};
use crate::audio::MultichannelAudio;
use crate::dsp::{ComplexSpectrogram, MelFilterbank, Stft, StftConfig};
use crate::error::{Result, SeldError};

/// Floor added inside every log of a power quantity.
pub const LOG_FLOOR: f64 = 1e-10;

/// `ln(|X|^2 . W_mel + eps)` per channel, `M x T x K`.
pub fn mel_spectrogram(spec: &ComplexSpectrogram, bank: &MelFilterbank, log_floor: f64) -> Result<Vec<f64>> {
    if spec.num_bins() != bank.num_bins() {
        return Err(SeldError::DimensionMismatch(format!(
            "spectrogram has {} bins, filterbank expects {}",
            spec.num_bins(),
            bank.num_bins()
        )));
    }
    let (frames, bands) = (spec.num_frames(), bank.num_bands());
    let mut out = vec![0.0; spec.num_channels() * frames * bands];
    for (ch, plane) in out.chunks_exact_mut(frames * bands).enumerate() {
        bank.apply_into(&spec.power(ch), frames, plane)?;
        plane.iter_mut().for_each(|v| *v = (*v + log_floor).ln());
    }
    Ok(out)
}

/// `ln(|X|^2 + eps)` over bins `0..bins`, `M x T x bins`.
pub fn log_power(spec: &ComplexSpectrogram, bins: usize, log_floor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.num_channels() * spec.num_frames() * bins);
    for ch in 0..spec.num_channels() {
        for t in 0..spec.num_frames() {
            out.extend(spec.frame(ch, t)[..bins].iter().map(|z| (z.norm_sqr() + log_floor).ln()));
        }
    }
    out
}

fn spectrogram(audio: &MultichannelAudio, stft: &Stft) -> Result<ComplexSpectrogram> {
    if audio.num_channels() < 2 {
        return Err(SeldError::TooFewChannels(audio.num_channels()));
    }
    stft.process(audio)
}

/// Log linear-frequency power stacked with NIPD maps, both cut at
/// `config.cutoff_bins`: `(2M-1) x T x cutoff`.
pub fn salsa_lite(audio: &MultichannelAudio, stft: &Stft, config: &SalsaConfig) -> Result<FeatureTensor> {
    let spec = spectrogram(audio, stft)?;
    config.validate(spec.num_bins())?;
    let bins = config.cutoff_bins;
    let mut values = log_power(&spec, bins, config.log_floor);
    values.extend(nipd_bins(&spec, config, bins)?);
    let m = audio.num_channels();
    FeatureTensor::new(
        FeatureKind::SalsaLite,
        2 * m - 1,
        spec.num_frames(),
        bins,
        values,
        FeatureLayout::for_mics(FeatureKind::SalsaLite, m, bins),
    )
}

/// Log mel spectrograms stacked with mel-projected NIPD maps (the
/// projection runs over all `F` bins): `(2M-1) x T x K`.
pub fn salsa_mel(
    audio: &MultichannelAudio,
    stft: &Stft,
    config: &SalsaConfig,
    bank: &MelFilterbank,
) -> Result<FeatureTensor> {
    let spec = spectrogram(audio, stft)?;
    config.validate(spec.num_bins())?;
    let frames = spec.num_frames();
    let mut values = mel_spectrogram(&spec, bank, config.log_floor)?;
    let phase = nipd_bins(&spec, config, spec.num_bins())?;
    for plane in phase.chunks_exact(frames * spec.num_bins()) {
        values.extend(bank.apply(plane, frames)?);
    }
    let m = audio.num_channels();
    FeatureTensor::new(
        FeatureKind::SalsaMel,
        2 * m - 1,
        frames,
        bank.num_bands(),
        values,
        FeatureLayout::for_mics(FeatureKind::SalsaMel, m, bank.num_bands()),
    )
}

/// Log mel spectrograms stacked with pairwise GCC-PHAT lag maps, which share
/// the `K`-wide bin axis: `(M + M(M-1)/2) x T x K`.
pub fn mel_gcc(
    audio: &MultichannelAudio,
    stft: &Stft,
    bank: &MelFilterbank,
    gcc: &GccConfig,
    log_floor: f64,
) -> Result<FeatureTensor> {
    if gcc.num_lags != bank.num_bands() {
        return Err(SeldError::DimensionMismatch(format!(
            "GCC lag count {} must equal mel band count {}",
            gcc.num_lags,
            bank.num_bands()
        )));
    }
    let spec = spectrogram(audio, stft)?;
    let mut values = mel_spectrogram(&spec, bank, log_floor)?;
    values.extend(gcc_phat(&spec, gcc)?);
    let m = audio.num_channels();
    let kind = FeatureKind::MelGcc;
    FeatureTensor::new(
        kind,
        kind.num_channels(m),
        spec.num_frames(),
        bank.num_bands(),
        values,
        FeatureLayout::for_mics(kind, m, bank.num_bands()),
    )
}

/// Holds the precomputed STFT plan and filterbank for repeated extraction.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    stft: Stft,
    bank: MelFilterbank,
    gcc: GccConfig,
    salsa: SalsaConfig,
}

impl FeatureExtractor {
    pub fn new(stft_config: StftConfig, bank: MelFilterbank, gcc: GccConfig, salsa: SalsaConfig) -> Result<Self> {
        let stft = Stft::new(stft_config)?;
        if bank.num_bins() != stft_config.num_bins() {
            return Err(SeldError::DimensionMismatch(format!(
                "filterbank built for {} bins, STFT has {}",
                bank.num_bins(),
                stft_config.num_bins()
            )));
        }
        gcc.validate(stft_config.fft_size)?;
        salsa.validate(stft_config.num_bins())?;
        Ok(Self { stft, bank, gcc, salsa })
    }

    /// Default STFT, 128-band mel bank, tetrahedral array, 191-bin cutoff.
    pub fn with_defaults() -> Result<Self> {
        let cfg = StftConfig::default();
        Self::new(cfg, MelFilterbank::default_for(&cfg)?, GccConfig::default(), SalsaConfig::default())
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }

    pub fn gcc_config(&self) -> &GccConfig {
        &self.gcc
    }

    pub fn salsa_config(&self) -> &SalsaConfig {
        &self.salsa
    }

    /// `(C, T, B)` that [`extract`](Self::extract) yields for `m` channels of
    /// `num_samples` samples.
    pub fn output_shape(&self, kind: FeatureKind, m: usize, num_samples: usize) -> (usize, usize, usize) {
        let frames = self.stft.config().num_frames(num_samples);
        let bins = match kind {
            FeatureKind::SalsaLite => self.salsa.cutoff_bins,
            FeatureKind::MelGcc | FeatureKind::SalsaMel => self.bank.num_bands(),
        };
        (kind.num_channels(m), frames, bins)
    }

    pub fn extract(&self, kind: FeatureKind, audio: &MultichannelAudio) -> Result<FeatureTensor> {
        match kind {
            FeatureKind::MelGcc => mel_gcc(audio, &self.stft, &self.bank, &self.gcc, self.salsa.log_floor),
            FeatureKind::SalsaLite => salsa_lite(audio, &self.stft, &self.salsa),
            FeatureKind::SalsaMel => salsa_mel(audio, &self.stft, &self.salsa, &self.bank),
        }
    }
}
