use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::ArrayGeometry;
use crate::dsp::ComplexSpectrogram;
use crate::error::{Result, SeldError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GccConfig {
    pub geometry: ArrayGeometry,
    /// Output lag count `K`; lags cover `(-K/2, K/2]` samples.
    pub num_lags: usize,
}

impl Default for GccConfig {
    fn default() -> Self {
        Self {
            geometry: ArrayGeometry::default(),
            num_lags: 128,
        }
    }
}

impl GccConfig {
    pub fn validate(&self, fft_size: usize) -> Result<()> {
        if self.num_lags == 0 || !self.num_lags.is_multiple_of(2) {
            return Err(SeldError::InvalidRange(format!(
                "lag count must be even and positive, got {}",
                self.num_lags
            )));
        }
        if self.num_lags > fft_size {
            return Err(SeldError::InvalidRange(format!(
                "lag count {} exceeds FFT size {fft_size}",
                self.num_lags
            )));
        }
        Ok(())
    }

    /// Largest physically meaningful lag, `f_s * d_max / c` samples.
    pub fn physical_lag_bound(&self, sample_rate_hz: u32) -> f64 {
        self.geometry.max_lag_samples(sample_rate_hz)
    }

    /// Lag in samples represented by output index `idx`.
    pub fn lag_at(&self, idx: usize) -> i64 {
        idx as i64 - (self.num_lags / 2) as i64 + 1
    }

    /// Output index of lag `lag`, if it is on the axis.
    pub fn index_of_lag(&self, lag: i64) -> Option<usize> {
        let idx = lag + (self.num_lags / 2) as i64 - 1;
        (0..self.num_lags as i64).contains(&idx).then_some(idx as usize)
    }
}

/// All unordered microphone pairs `(i, j)` with `i < j`, in row order.
pub(crate) fn mic_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

/// GCC-PHAT for every unordered pair, `P x T x K` with `P = M(M-1)/2`.
///
/// Lag `tau` follows the cross-correlation convention
/// `sum_n x_i[n] x_j[n + tau]`, so a positive lag means channel `j` lags
/// channel `i`. Cross-spectrum bins with zero magnitude whiten to zero.
pub fn gcc_phat(spec: &ComplexSpectrogram, config: &GccConfig) -> Result<Vec<f64>> {
    let m = spec.num_channels();
    if m < 2 {
        return Err(SeldError::TooFewChannels(m));
    }
    let n = spec.config().fft_size;
    config.validate(n)?;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let pairs = mic_pairs(m);
    let mut out = vec![0.0; pairs.len() * spec.num_frames() * config.num_lags];
    let plane = spec.num_frames() * config.num_lags;
    for (p, &(i, j)) in pairs.iter().enumerate() {
        gcc_pair_into(spec, i, j, config.num_lags, &fft, &mut out[p * plane..(p + 1) * plane]);
    }
    Ok(out)
}

fn gcc_pair_into(
    spec: &ComplexSpectrogram,
    i: usize,
    j: usize,
    num_lags: usize,
    fft: &Arc<dyn Fft<f64>>,
    out: &mut [f64],
) {
    let n = spec.config().fft_size;
    let bins = spec.num_bins();
    let half = num_lags / 2;
    let scale = 1.0 / n as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for t in 0..spec.num_frames() {
        let (xi, xj) = (spec.frame(i, t), spec.frame(j, t));
        for k in 0..bins {
            let cross = xi[k] * xj[k].conj();
            let mag = cross.norm();
            buf[k] = if mag > 0.0 { cross / mag } else { Complex64::new(0.0, 0.0) };
        }
        for k in 1..n - bins + 1 {
            buf[n - k] = buf[k].conj();
        }
        // forward transform of the whitened cross-spectrum evaluates the
        // inverse transform at -tau, which is the lag convention above
        fft.process_with_scratch(&mut buf, &mut scratch);
        let row = &mut out[t * num_lags..(t + 1) * num_lags];
        for (idx, v) in row.iter_mut().enumerate() {
            let lag = idx as i64 - half as i64 + 1;
            *v = buf[lag.rem_euclid(n as i64) as usize].re * scale;
        }
    }
}
