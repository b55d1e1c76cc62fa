use super::StftConfig;
use crate::error::{Result, SeldError};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank stored as a dense `F x K` matrix (row-major,
/// one row per linear frequency bin).
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    num_bins: usize,
    num_bands: usize,
    f_min: f64,
    f_max: f64,
    center_hz: Vec<f64>,
}

impl MelFilterbank {
    /// Filters with unit peak, centers uniformly spaced on the mel scale.
    ///
    /// A filter narrower than the bin spacing may straddle no bin center; such
    /// a filter gets a single unit weight at the bin nearest its center so
    /// every band carries energy.
    pub fn new(config: &StftConfig, num_bands: usize, f_min: f64, f_max: f64) -> Result<Self> {
        let nyquist = config.sample_rate_hz as f64 / 2.0;
        if num_bands == 0 {
            return Err(SeldError::InvalidRange("need at least one mel band".into()));
        }
        if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
            return Err(SeldError::InvalidRange(format!(
                "mel range must satisfy 0 <= f_min < f_max <= {nyquist}, got [{f_min}, {f_max}]"
            )));
        }
        let num_bins = config.num_bins();
        let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let mut edges: Vec<f64> = (0..num_bands + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (num_bands + 1) as f64))
            .collect();
        // pin the outer edges against round-off in the mel round trip
        edges[0] = f_min;
        edges[num_bands + 1] = f_max;

        let mut weights = vec![0.0; num_bins * num_bands];
        for k in 0..num_bands {
            let (lo, center, hi) = (edges[k], edges[k + 1], edges[k + 2]);
            let mut any = false;
            for f in 0..num_bins {
                let hz = config.bin_frequency_hz(f);
                let rising = (hz - lo) / (center - lo);
                let falling = (hi - hz) / (hi - center);
                let w = rising.min(falling).max(0.0);
                if w > 0.0 {
                    weights[f * num_bands + k] = w;
                    any = true;
                }
            }
            if !any {
                let bin_hz = config.sample_rate_hz as f64 / config.fft_size as f64;
                let nearest = ((center / bin_hz).round() as usize).min(num_bins - 1);
                weights[nearest * num_bands + k] = 1.0;
            }
        }
        Ok(Self {
            weights,
            num_bins,
            num_bands,
            f_min,
            f_max,
            center_hz: edges[1..=num_bands].to_vec(),
        })
    }

    /// 128 bands over `[0, f_s / 2]`.
    pub fn default_for(config: &StftConfig) -> Result<Self> {
        Self::new(config, 128, 0.0, config.sample_rate_hz as f64 / 2.0)
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Peak frequency of each filter.
    pub fn center_hz(&self) -> &[f64] {
        &self.center_hz
    }

    pub fn weight(&self, bin: usize, band: usize) -> f64 {
        self.weights[bin * self.num_bands + band]
    }

    /// Row `bin` of the weight matrix.
    pub fn row(&self, bin: usize) -> &[f64] {
        &self.weights[bin * self.num_bands..(bin + 1) * self.num_bands]
    }

    pub fn column(&self, band: usize) -> Vec<f64> {
        (0..self.num_bins).map(|f| self.weight(f, band)).collect()
    }

    /// `rows x F` times the `F x K` weights, giving `rows x K`.
    pub fn apply(&self, matrix: &[f64], rows: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; rows * self.num_bands];
        self.apply_into(matrix, rows, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, matrix: &[f64], rows: usize, out: &mut [f64]) -> Result<()> {
        if matrix.len() != rows * self.num_bins {
            return Err(SeldError::DimensionMismatch(format!(
                "mel projection expects {rows} x {} input, got {} values",
                self.num_bins,
                matrix.len()
            )));
        }
        if out.len() != rows * self.num_bands {
            return Err(SeldError::DimensionMismatch("mel output buffer has wrong size".into()));
        }
        for (row_in, row_out) in matrix
            .chunks_exact(self.num_bins)
            .zip(out.chunks_exact_mut(self.num_bands))
        {
            row_out.fill(0.0);
            for (f, &x) in row_in.iter().enumerate() {
                for (o, &w) in row_out.iter_mut().zip(self.row(f)) {
                    *o += x * w;
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`MelFilterbank::new`].
pub fn mel_filterbank(config: &StftConfig, num_bands: usize, f_min: f64, f_max: f64) -> Result<MelFilterbank> {
    MelFilterbank::new(config, num_bands, f_min, f_max)
}

/// Free-function form of [`MelFilterbank::apply`].
pub fn apply_mel(matrix: &[f64], rows: usize, bank: &MelFilterbank) -> Result<Vec<f64>> {
    bank.apply(matrix, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bank() -> MelFilterbank {
        MelFilterbank::default_for(&StftConfig::default()).unwrap()
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 100.0, 700.0, 1000.0, 12_000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn default_bank_is_non_negative_and_every_band_has_weight() {
        let b = bank();
        assert_eq!((b.num_bins(), b.num_bands()), (257, 128));
        for k in 0..128 {
            let col = b.column(k);
            assert!(col.iter().all(|&w| w >= 0.0));
            assert!(col.iter().sum::<f64>() > 0.0, "band {k} empty");
            // contiguous support
            let nz: Vec<usize> = (0..257).filter(|&f| col[f] > 0.0).collect();
            assert_eq!(nz.last().unwrap() - nz[0] + 1, nz.len(), "band {k} has a hole");
        }
    }

    #[test]
    fn single_band_spans_the_range() {
        let cfg = StftConfig::default();
        let b = MelFilterbank::new(&cfg, 1, 0.0, 12_000.0).unwrap();
        let col = b.column(0);
        let nz: Vec<usize> = (0..257).filter(|&f| col[f] > 0.0).collect();
        assert_eq!(nz[0], 1);
        assert_eq!(*nz.last().unwrap(), 255);
        let expected_center = mel_to_hz(hz_to_mel(12_000.0) / 2.0);
        assert!((b.center_hz()[0] - expected_center).abs() < 1e-9);
    }

    #[test]
    fn centers_follow_mel_breakpoints() {
        let b = bank();
        // recompute the breakpoints by bisection on the mel formula
        let top = 2595.0 * (1.0f64 + 12_000.0 / 700.0).log10();
        for (k, &c) in b.center_hz().iter().enumerate() {
            let target = top * (k + 1) as f64 / 129.0;
            let (mut lo, mut hi) = (0.0f64, 12_000.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if 2595.0 * (1.0 + mid / 700.0).log10() < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((c - lo).abs() < 1e-6, "band {k}: {c} vs {lo}");
            if k > 0 {
                assert!(c > b.center_hz()[k - 1]);
            }
        }
    }

    #[test]
    fn invalid_ranges() {
        let cfg = StftConfig::default();
        assert!(MelFilterbank::new(&cfg, 0, 0.0, 100.0).is_err());
        assert!(MelFilterbank::new(&cfg, 8, 100.0, 100.0).is_err());
        assert!(MelFilterbank::new(&cfg, 8, 0.0, 13_000.0).is_err());
        assert!(MelFilterbank::new(&cfg, 8, -1.0, 100.0).is_err());
    }

    #[test]
    fn zero_in_zero_out_and_basis_rows() {
        let b = bank();
        assert!(b.apply(&vec![0.0; 3 * 257], 3).unwrap().iter().all(|&v| v == 0.0));
        let mut one_hot = vec![0.0; 257];
        one_hot[40] = 1.0;
        assert_eq!(b.apply(&one_hot, 1).unwrap(), b.row(40).to_vec());
    }

    #[test]
    fn matches_naive_triple_loop() {
        let b = bank();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m: Vec<f64> = (0..3 * 257).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let got = b.apply(&m, 3).unwrap();
        for t in 0..3 {
            for k in 0..128 {
                let mut acc = 0.0;
                for f in 0..257 {
                    acc += m[t * 257 + f] * b.weight(f, k);
                }
                assert!((got[t * 128 + k] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(bank().apply(&[0.0; 256], 1), Err(SeldError::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn linear_and_positivity_preserving(
            a in proptest::collection::vec(0.0f64..10.0, 257),
            b in proptest::collection::vec(0.0f64..10.0, 257),
            s in -3.0f64..3.0,
        ) {
            let bank = bank();
            let ya = bank.apply(&a, 1).unwrap();
            let yb = bank.apply(&b, 1).unwrap();
            prop_assert!(ya.iter().all(|&v| v >= 0.0));
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
            let ym = bank.apply(&mix, 1).unwrap();
            for k in 0..128 {
                prop_assert!((ym[k] - (s * ya[k] + yb[k])).abs() < 1e-9);
            }
        }
    }
}
