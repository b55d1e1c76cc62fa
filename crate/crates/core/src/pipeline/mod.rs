//! The real-time loop: capture blocks, window, extract, infer, decode, and
//! account every window against the `T_r` deadline.

mod latency;
mod run;
mod sweep;

pub use latency::{check_budget, LatencyCsvWriter, LatencyReport, LATENCY_CSV_HEADER};
pub use run::{
    run_realtime, CollectingSink, CsvSink, DeadlinePolicy, PipelineConfig, PipelineSink, RunMode, RunSummary,
    WindowResult,
};
pub use sweep::{profile_sweep, time_once, SweepOptions, SweepResult, SweepRow};

use crate::features::{FeatureExtractor, FeatureKind};
use crate::inference::InputSpec;

/// Backend input spec for `kind` features over a window of `window_samples`.
pub fn window_input_spec(extractor: &FeatureExtractor, kind: FeatureKind, num_mics: usize, window_samples: usize) -> InputSpec {
    let (channels, frames, bins) = extractor.output_shape(kind, num_mics, window_samples);
    InputSpec {
        kind,
        channels,
        frames,
        bins,
        frame_seconds: extractor.stft().config().frame_seconds(),
    }
}
