use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::latency::{csv_io, LatencyReport};
use super::window_input_spec;
use crate::audio::{white_noise, AudioFormat, MultichannelAudio};
use crate::error::{Result, SeldError};
use crate::features::{FeatureExtractor, FeatureKind};
use crate::inference::{run_backend, InputSpec, ModelBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub iterations: usize,
    /// Budget the excess column is measured against.
    pub block_seconds: f64,
    pub format: AudioFormat,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            iterations: 1000,
            block_seconds: 1.0,
            format: AudioFormat::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: FeatureKind,
    pub model: String,
    pub window_seconds: f64,
    pub feature_seconds: f64,
    pub inference_seconds: f64,
    pub excess_seconds: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by window length, then by the order kinds were given.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Columns `kind,model,T_w,feature_s,inference_s`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "model", "T_w", "feature_s", "inference_s"]).map_err(csv_io)?;
        for r in &self.rows {
            w.write_record(&[
                r.kind.to_string(),
                r.model.clone(),
                r.window_seconds.to_string(),
                format!("{:.9}", r.feature_seconds),
                format!("{:.9}", r.inference_seconds),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean feature and inference wall-clock time per `(kind, T_w)` on seeded
/// white noise. `make_backend` builds a backend for each input spec.
pub fn profile_sweep(
    kinds: &[FeatureKind],
    window_seconds: &[f64],
    extractor: &FeatureExtractor,
    make_backend: &mut dyn FnMut(InputSpec) -> Result<Box<dyn ModelBackend>>,
    options: &SweepOptions,
) -> Result<SweepResult> {
    if options.iterations == 0 {
        return Err(SeldError::InvalidRange("iterations must be >= 1".into()));
    }
    if kinds.is_empty() || window_seconds.is_empty() {
        return Err(SeldError::InvalidRange("need at least one kind and one window length".into()));
    }
    let mut windows = window_seconds.to_vec();
    if windows.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(SeldError::InvalidRange("window lengths must be > 0".into()));
    }
    windows.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for &t_w in &windows {
        let samples = options.format.samples_for(t_w);
        let channels = (0..options.format.num_channels)
            .map(|m| white_noise(samples, 0.1, options.seed.wrapping_add(m as u64)))
            .collect();
        let audio = MultichannelAudio::from_channels(options.format.sample_rate_hz, channels)?;
        for &kind in kinds {
            let spec = window_input_spec(extractor, kind, options.format.num_channels, samples);
            let mut backend = make_backend(spec)?;
            let (mut feature_total, mut inference_total) = (0.0, 0.0);
            for _ in 0..options.iterations {
                let t0 = Instant::now();
                let features = extractor.extract(kind, &audio)?;
                feature_total += t0.elapsed().as_secs_f64();
                let (_, secs) = run_backend(backend.as_mut(), &features)?;
                inference_total += secs;
            }
            let n = options.iterations as f64;
            let (feature_seconds, inference_seconds) = (feature_total / n, inference_total / n);
            rows.push(SweepRow {
                kind,
                model: backend.name().to_string(),
                window_seconds: t_w,
                feature_seconds,
                inference_seconds,
                excess_seconds: options.block_seconds - feature_seconds - inference_seconds,
                iterations: options.iterations,
            });
        }
    }
    Ok(SweepResult { rows })
}

/// Latency of a single timed pass, for callers that want per-iteration
/// reports instead of means.
pub fn time_once(
    extractor: &FeatureExtractor,
    kind: FeatureKind,
    audio: &MultichannelAudio,
    backend: &mut dyn ModelBackend,
    block_seconds: f64,
) -> Result<LatencyReport> {
    let t0 = Instant::now();
    let features = extractor.extract(kind, audio)?;
    let feature = t0.elapsed();
    let t1 = Instant::now();
    run_backend(backend, &features)?;
    let inference = t1.elapsed();
    Ok(LatencyReport::new(0, feature, inference, std::time::Duration::from_secs_f64(block_seconds)))
}
