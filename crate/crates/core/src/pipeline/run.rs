use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::latency::{LatencyCsvWriter, LatencyReport};
use crate::audio::{AudioBlock, AudioFormat, BlockRingBuffer, MultichannelAudio, SharedRingBuffer};
use crate::error::{Result, SeldError};
use crate::features::{FeatureExtractor, FeatureKind};
use crate::inference::{decode_multi_accdoa, run_backend, write_events_csv, DecodeConfig, ModelBackend, SeldEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeadlinePolicy {
    /// After an overrun, process only the newest window and count the
    /// windows passed over.
    #[default]
    SkipToLatest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Single thread, blocks consumed as fast as they come, every window
    /// processed.
    #[default]
    Deterministic,
    /// Capture and processing on separate threads.
    Threaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// `T_r`, seconds.
    pub block_seconds: f64,
    /// `n`; the window spans `T_w = n * T_r`.
    pub blocks_per_window: usize,
    pub kind: FeatureKind,
    pub decode: DecodeConfig,
    pub deadline_policy: DeadlinePolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            block_seconds: 1.0,
            blocks_per_window: 2,
            kind: FeatureKind::SalsaLite,
            decode: DecodeConfig::default(),
            deadline_policy: DeadlinePolicy::SkipToLatest,
        }
    }
}

impl PipelineConfig {
    pub fn window_seconds(&self) -> f64 {
        self.block_seconds * self.blocks_per_window as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.block_seconds > 0.0 && self.block_seconds.is_finite()) {
            return Err(SeldError::InvalidRange(format!("T_r must be > 0, got {}", self.block_seconds)));
        }
        if self.blocks_per_window == 0 {
            return Err(SeldError::InvalidRange("n must be >= 1".into()));
        }
        self.decode.validate()
    }
}

/// Everything produced for one processed window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    /// Sequence index of the newest block in the window.
    pub block_index: u64,
    /// Index of the window's first output frame on the stream's output grid.
    pub start_frame: usize,
    pub output_frames: usize,
    pub output_frame_seconds: f64,
    /// Events with window-relative frame indices.
    pub events: Vec<SeldEvent>,
    pub report: LatencyReport,
}

/// Receives window results on the processing thread.
pub trait PipelineSink {
    fn on_window(&mut self, window: &WindowResult) -> Result<()>;
}

/// Keeps every window result in memory.
#[derive(Debug, Default)]
pub struct CollectingSink {
    pub windows: Vec<WindowResult>,
}

impl PipelineSink for CollectingSink {
    fn on_window(&mut self, window: &WindowResult) -> Result<()> {
        self.windows.push(window.clone());
        Ok(())
    }
}

/// Writes the events CSV and the latency CSV.
///
/// Consecutive windows overlap; every output frame is written once, from
/// the first window that covers it.
pub struct CsvSink<E: Write, L: Write> {
    events: E,
    latency: LatencyCsvWriter<L>,
    next_frame: usize,
}

impl<E: Write, L: Write> CsvSink<E, L> {
    pub fn new(events: E, latency: L) -> Result<Self> {
        Ok(Self {
            events,
            latency: LatencyCsvWriter::new(latency)?,
            next_frame: 0,
        })
    }

    pub fn finish(mut self) -> Result<()> {
        self.events.flush()?;
        self.latency.flush()
    }
}

impl<E: Write, L: Write> PipelineSink for CsvSink<E, L> {
    fn on_window(&mut self, w: &WindowResult) -> Result<()> {
        let fresh: Vec<SeldEvent> = w
            .events
            .iter()
            .filter(|e| w.start_frame + e.frame >= self.next_frame)
            .copied()
            .collect();
        write_events_csv(&mut self.events, &fresh, w.start_frame)?;
        self.next_frame = self.next_frame.max(w.start_frame + w.output_frames);
        self.latency.write(&w.report)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub blocks_captured: u64,
    pub windows_processed: u64,
    /// Complete windows never processed because a newer one was taken.
    pub windows_skipped: u64,
    pub overruns: u64,
    /// Blocks evicted from the ring without ever being read.
    pub blocks_dropped: u64,
    pub last_block_index: Option<u64>,
    pub mean_feature_seconds: f64,
    pub mean_inference_seconds: f64,
    pub max_processing_seconds: f64,
}

struct Processor<'a> {
    config: &'a PipelineConfig,
    extractor: &'a FeatureExtractor,
    backend: &'a mut dyn ModelBackend,
    sink: &'a mut dyn PipelineSink,
    budget: Duration,
    frames_per_block: f64,
    summary: RunSummary,
    feature_total: f64,
    inference_total: f64,
}

impl Processor<'_> {
    fn process(&mut self, block_index: u64, window: &MultichannelAudio) -> Result<()> {
        let t0 = Instant::now();
        let features = self.extractor.extract(self.config.kind, window)?;
        let feature_time = t0.elapsed();
        let t1 = Instant::now();
        let (output, _) = run_backend(self.backend, &features)?;
        let events = decode_multi_accdoa(&output, &self.config.decode);
        let inference_time = t1.elapsed();

        let report = LatencyReport::new(block_index, feature_time, inference_time, self.budget);
        let first_block = block_index + 1 - self.config.blocks_per_window as u64;
        let result = WindowResult {
            block_index,
            start_frame: (first_block as f64 * self.frames_per_block).round() as usize,
            output_frames: output.frames(),
            output_frame_seconds: output.frame_seconds(),
            events,
            report,
        };
        self.sink.on_window(&result)?;

        let s = &mut self.summary;
        s.windows_processed += 1;
        s.overruns += report.overrun as u64;
        s.max_processing_seconds = s
            .max_processing_seconds
            .max(report.feature_seconds() + report.inference_seconds());
        self.feature_total += report.feature_seconds();
        self.inference_total += report.inference_seconds();
        Ok(())
    }

    fn finish(mut self, blocks_captured: u64, last: Option<u64>, dropped: u64) -> RunSummary {
        let n = self.config.blocks_per_window as u64;
        let s = &mut self.summary;
        s.blocks_captured = blocks_captured;
        s.last_block_index = last;
        s.blocks_dropped = dropped;
        s.windows_skipped = blocks_captured.saturating_sub(n - 1).saturating_sub(s.windows_processed);
        if s.windows_processed > 0 {
            s.mean_feature_seconds = self.feature_total / s.windows_processed as f64;
            s.mean_inference_seconds = self.inference_total / s.windows_processed as f64;
        }
        self.summary
    }
}

/// Runs capture, windowing, feature extraction, inference and decoding.
///
/// Every window's result goes to `sink`. Returns when the source is
/// exhausted or on the first processing error. In threaded mode capture runs
/// on its own thread and never waits for processing; when processing falls
/// behind, only the newest complete window is taken.
pub fn run_realtime<S>(
    source: S,
    format: AudioFormat,
    config: &PipelineConfig,
    extractor: &FeatureExtractor,
    backend: &mut dyn ModelBackend,
    sink: &mut dyn PipelineSink,
    mode: RunMode,
) -> Result<RunSummary>
where
    S: Iterator<Item = AudioBlock> + Send,
{
    config.validate()?;
    let block_len = format.samples_for(config.block_seconds);
    let n = config.blocks_per_window;
    let (c, t, b) = extractor.output_shape(config.kind, format.num_channels, n * block_len);
    let spec = *backend.input_spec();
    if spec.kind != config.kind || (spec.channels, spec.frames, spec.bins) != (c, t, b) {
        return Err(SeldError::SpecMismatch {
            expected: spec.describe(),
            found: format!("{} {c}x{t}x{b}", config.kind),
        });
    }
    let out_frame_seconds = backend.output_spec().frame_seconds;
    let ring = BlockRingBuffer::new(n, format, block_len)?;
    let mut processor = Processor {
        config,
        extractor,
        backend,
        sink,
        budget: Duration::from_secs_f64(config.block_seconds),
        frames_per_block: config.block_seconds / out_frame_seconds,
        summary: RunSummary::default(),
        feature_total: 0.0,
        inference_total: 0.0,
    };
    match mode {
        RunMode::Deterministic => run_inline(source, ring, processor),
        RunMode::Threaded => {
            let shared = SharedRingBuffer::new(ring);
            let stop = AtomicBool::new(false);
            std::thread::scope(|scope| {
                let producer = scope.spawn(|| -> Result<(u64, Option<u64>)> {
                    let mut captured = 0u64;
                    let mut last = None;
                    let mut result = Ok(());
                    for block in source {
                        if stop.load(Ordering::Relaxed) {
                            break;
                        }
                        let index = block.sequence_index;
                        if let Err(e) = shared.push_block(block) {
                            result = Err(e);
                            break;
                        }
                        captured += 1;
                        last = Some(index);
                    }
                    shared.close();
                    result.map(|_| (captured, last))
                });
                let consumed = consume(&shared, &mut processor);
                if consumed.is_err() {
                    stop.store(true, Ordering::Relaxed);
                }
                let produced = producer.join().expect("capture thread panicked");
                consumed?;
                let (captured, last) = produced?;
                Ok(processor.finish(captured, last, shared.dropped_count()))
            })
        }
    }
}

fn run_inline<S: Iterator<Item = AudioBlock>>(
    source: S,
    mut ring: BlockRingBuffer,
    mut processor: Processor<'_>,
) -> Result<RunSummary> {
    let mut captured = 0u64;
    let mut last = None;
    for block in source {
        let index = block.sequence_index;
        ring.push_block(block)?;
        captured += 1;
        last = Some(index);
        if ring.len() == ring.capacity() {
            let window = ring.latest_window()?;
            processor.process(index, &window)?;
        }
    }
    Ok(processor.finish(captured, last, ring.dropped_count()))
}

fn consume(shared: &SharedRingBuffer, processor: &mut Processor<'_>) -> Result<()> {
    let mut last = None;
    while shared.wait_for_window(last).is_some() {
        let (index, window) = shared.latest_window()?;
        processor.process(index, &window)?;
        last = Some(index);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{white_noise, SimulatedCapture};
    use crate::inference::{make_mock_backend, InputSpec, MockBehavior, ScriptedEvent};

    fn noise(seconds: f64) -> MultichannelAudio {
        let n = (24_000.0 * seconds) as usize;
        let channels = (0..4).map(|m| white_noise(n, 0.1, m as u64)).collect();
        MultichannelAudio::from_channels(24_000, channels).unwrap()
    }

    fn setup(config: &PipelineConfig, behavior: MockBehavior) -> (FeatureExtractor, Box<dyn ModelBackend>) {
        let ex = FeatureExtractor::with_defaults().unwrap();
        let samples = 24_000 * config.blocks_per_window;
        let (c, t, b) = ex.output_shape(config.kind, 4, samples);
        let spec = InputSpec {
            kind: config.kind,
            channels: c,
            frames: t,
            bins: b,
            frame_seconds: ex.stft().config().frame_seconds(),
        };
        (ex, Box::new(make_mock_backend(spec, behavior).unwrap()))
    }

    #[test]
    fn dry_run_produces_one_report_per_full_window() {
        let config = PipelineConfig::default();
        let (ex, mut be) = setup(&config, MockBehavior::Zeros);
        let capture = SimulatedCapture::new(noise(10.0), 1.0).unwrap();
        let mut sink = CollectingSink::default();
        let s = run_realtime(capture, AudioFormat::default(), &config, &ex, be.as_mut(), &mut sink, RunMode::Deterministic)
            .unwrap();
        assert_eq!(sink.windows.len(), 9);
        assert_eq!((s.blocks_captured, s.windows_processed, s.windows_skipped), (10, 9, 0));
        assert_eq!(s.blocks_dropped, 0);
        let indices: Vec<u64> = sink.windows.iter().map(|w| w.block_index).collect();
        assert_eq!(indices, (1..10).collect::<Vec<_>>());
        for w in &sink.windows {
            assert!(w.events.is_empty());
            let r = w.report;
            assert_eq!(r.feature_ns as i64 + r.inference_ns as i64 + r.excess_ns, 1_000_000_000);
            assert_eq!(w.start_frame, (w.block_index as usize - 1) * 10);
        }
    }

    #[test]
    fn spec_mismatch_is_reported_up_front() {
        let config = PipelineConfig::default();
        let (ex, mut be) = setup(&PipelineConfig { kind: FeatureKind::MelGcc, ..config.clone() }, MockBehavior::Zeros);
        let capture = SimulatedCapture::new(noise(3.0), 1.0).unwrap();
        let err = run_realtime(capture, AudioFormat::default(), &config, &ex, be.as_mut(), &mut CollectingSink::default(), RunMode::Deterministic)
            .unwrap_err();
        assert!(matches!(err, SeldError::SpecMismatch { .. }));
    }

    #[test]
    fn scripted_events_are_stitched_once() {
        let config = PipelineConfig::default();
        let script: Vec<ScriptedEvent> = (0..10)
            .map(|frame| ScriptedEvent { frame, class_id: 3, direction: [1.0, 0.0, 0.0] })
            .collect();
        let (ex, mut be) = setup(&config, MockBehavior::Scripted { events: script });
        let capture = SimulatedCapture::new(noise(4.0), 1.0).unwrap();
        let (mut events, mut latency) = (Vec::new(), Vec::new());
        {
            let mut sink = CsvSink::new(&mut events, &mut latency).unwrap();
            run_realtime(capture, AudioFormat::default(), &config, &ex, be.as_mut(), &mut sink, RunMode::Deterministic).unwrap();
            sink.finish().unwrap();
        }
        let text = String::from_utf8(events).unwrap();
        let expected: String = (0..10).map(|f| format!("{f},3,0,0\n")).collect();
        assert_eq!(text, expected);
        assert_eq!(String::from_utf8(latency).unwrap().lines().count(), 4);
    }

    #[test]
    fn backend_failure_propagates_from_thread_mode() {
        let config = PipelineConfig::default();
        let (ex, mut be) = setup(&config, MockBehavior::Failing { message: "boom".into() });
        let capture = SimulatedCapture::new(noise(3.0), 1.0).unwrap();
        let err = run_realtime(capture, AudioFormat::default(), &config, &ex, be.as_mut(), &mut CollectingSink::default(), RunMode::Threaded)
            .unwrap_err();
        assert!(matches!(err, SeldError::BackendFailure(_)));
    }

    #[test]
    fn threaded_mode_processes_every_window_when_fast() {
        let config = PipelineConfig { block_seconds: 0.25, ..PipelineConfig::default() };
        let ex = FeatureExtractor::with_defaults().unwrap();
        let (c, t, b) = ex.output_shape(config.kind, 4, 12_000);
        let spec = InputSpec { kind: config.kind, channels: c, frames: t, bins: b, frame_seconds: 0.0125 };
        let mut be = make_mock_backend(spec, MockBehavior::Zeros).unwrap();
        let capture = SimulatedCapture::new(noise(2.0), 0.25).unwrap().paced();
        let mut sink = CollectingSink::default();
        let s = run_realtime(capture, AudioFormat::default(), &config, &ex, &mut be, &mut sink, RunMode::Threaded).unwrap();
        assert_eq!(s.blocks_captured, 8);
        assert_eq!(s.windows_processed + s.windows_skipped, 7);
        assert!(s.windows_processed >= 1);
        let idx: Vec<u64> = sink.windows.iter().map(|w| w.block_index).collect();
        assert!(idx.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn config_validation() {
        let c = PipelineConfig { blocks_per_window: 0, ..PipelineConfig::default() };
        assert!(c.validate().is_err());
        let c = PipelineConfig { block_seconds: 0.0, ..PipelineConfig::default() };
        assert!(c.validate().is_err());
        assert!((PipelineConfig::default().window_seconds() - 2.0).abs() < 1e-12);
    }
}
