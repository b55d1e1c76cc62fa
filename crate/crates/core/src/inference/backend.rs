use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::accdoa::{MultiAccdoaOutput, DEFAULT_CLASSES, DEFAULT_TRACKS};
use crate::direction::{normalize, Vec3};
use crate::error::{Result, SeldError};
use crate::features::{FeatureKind, FeatureTensor};

/// Input frames pooled into one output frame by the mock backends; 8 STFT
/// frames of 12.5 ms give the 100 ms label resolution.
pub const MOCK_TIME_POOL: usize = 8;

/// Shape a backend expects on its input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub kind: FeatureKind,
    pub channels: usize,
    pub frames: usize,
    pub bins: usize,
    /// Duration of one feature frame (STFT hop), seconds.
    pub frame_seconds: f64,
}

impl InputSpec {
    pub fn matches(&self, features: &FeatureTensor) -> bool {
        features.kind() == self.kind && features.shape() == (self.channels, self.frames, self.bins)
    }

    pub fn describe(&self) -> String {
        format!("{} {}x{}x{}", self.kind, self.channels, self.frames, self.bins)
    }
}

impl fmt::Display for InputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub frames: usize,
    pub tracks: usize,
    pub classes: usize,
    pub frame_seconds: f64,
}

/// A model that maps one feature window to a multi-ACCDOA output.
///
/// Implementations must be deterministic for fixed weights. One instance is
/// driven by one thread at a time.
pub trait ModelBackend: Send {
    fn name(&self) -> &str;
    fn input_spec(&self) -> &InputSpec;
    fn output_spec(&self) -> &OutputSpec;
    fn infer(&mut self, features: &FeatureTensor) -> Result<MultiAccdoaOutput>;
}

/// Checks the input against the backend spec, runs it and times the call.
pub fn run_backend(backend: &mut dyn ModelBackend, features: &FeatureTensor) -> Result<(MultiAccdoaOutput, f64)> {
    let spec = backend.input_spec();
    if !spec.matches(features) {
        let (c, t, b) = features.shape();
        return Err(SeldError::SpecMismatch {
            expected: spec.describe(),
            found: format!("{} {c}x{t}x{b}", features.kind()),
        });
    }
    let start = Instant::now();
    let output = backend.infer(features)?;
    let seconds = start.elapsed().as_secs_f64();
    let out = backend.output_spec();
    if (output.frames(), output.tracks(), output.classes()) != (out.frames, out.tracks, out.classes) {
        return Err(SeldError::BackendFailure(format!(
            "{} returned {}x{}x{} but declares {}x{}x{}",
            backend.name(),
            output.frames(),
            output.tracks(),
            output.classes(),
            out.frames,
            out.tracks,
            out.classes
        )));
    }
    Ok((output, seconds))
}

/// One event a scripted mock should produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub frame: usize,
    pub class_id: usize,
    pub direction: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "behavior")]
pub enum MockBehavior {
    Zeros,
    FixedLinear { seed: u64 },
    /// Emits unit vectors for the listed events; decodes back to exactly
    /// these events as long as same-class events in a frame are further
    /// apart than the merge angle.
    Scripted { events: Vec<ScriptedEvent> },
    /// Sleeps, then emits zeros.
    Delay { seconds: f64 },
    /// Always fails with `BackendFailure`.
    Failing { message: String },
}

impl FromStr for MockBehavior {
    type Err = SeldError;

    /// `zeros`, `linear:SEED`, `delay:SECONDS` or `fail[:MESSAGE]`.
    /// Scripted behaviors need an event list and are built from files.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = |what: &str| SeldError::Config(format!("invalid backend spec '{s}': {what}"));
        match (head, arg) {
            ("zeros", None) => Ok(MockBehavior::Zeros),
            ("linear" | "fixed-linear", Some(a)) => Ok(MockBehavior::FixedLinear {
                seed: a.parse().map_err(|_| bad("seed must be an unsigned integer"))?,
            }),
            ("delay", Some(a)) => {
                let seconds: f64 = a.parse().map_err(|_| bad("delay must be a number"))?;
                if !(seconds >= 0.0 && seconds.is_finite()) {
                    return Err(bad("delay must be >= 0"));
                }
                Ok(MockBehavior::Delay { seconds })
            }
            ("fail", a) => Ok(MockBehavior::Failing {
                message: a.unwrap_or("mock failure").to_string(),
            }),
            _ => Err(bad("expected zeros, linear:SEED, scripted:PATH or delay:SECONDS")),
        }
    }
}

/// Parses a backend spec string: `zeros`, `linear:SEED`, `delay:SECONDS`,
/// `fail[:MESSAGE]` or `scripted:PATH`. The scripted file is either a JSON
/// list of [`ScriptedEvent`] or a label CSV (`frame,class,azimuth,elevation`).
pub fn behavior_from_spec(spec: &str) -> Result<MockBehavior> {
    let Some(path) = spec.strip_prefix("scripted:") else {
        return spec.parse();
    };
    let text = std::fs::read_to_string(path)?;
    let events = if path.ends_with(".json") {
        serde_json::from_str(&text)?
    } else {
        super::accdoa::read_label_csv(text.as_bytes())?
            .into_iter()
            .map(|r| ScriptedEvent {
                frame: r.frame,
                class_id: r.class_id,
                direction: r.direction(),
            })
            .collect()
    };
    Ok(MockBehavior::Scripted { events })
}

/// Deterministic stand-in for a trained network.
#[derive(Debug, Clone)]
pub struct MockBackend {
    name: String,
    input: InputSpec,
    output: OutputSpec,
    time_pool: usize,
    behavior: MockBehavior,
    weights: Vec<f64>,
    template: Option<MultiAccdoaOutput>,
}

/// Builds a mock with [`MOCK_TIME_POOL`] and the default 3 tracks x 13 classes.
pub fn make_mock_backend(input: InputSpec, behavior: MockBehavior) -> Result<MockBackend> {
    MockBackend::new(input, behavior, MOCK_TIME_POOL, DEFAULT_TRACKS, DEFAULT_CLASSES)
}

impl MockBackend {
    pub fn new(
        input: InputSpec,
        behavior: MockBehavior,
        time_pool: usize,
        tracks: usize,
        classes: usize,
    ) -> Result<Self> {
        if input.channels == 0 || input.frames == 0 || input.bins == 0 {
            return Err(SeldError::InvalidSpec(format!("empty input spec {input}")));
        }
        if !(input.frame_seconds > 0.0) {
            return Err(SeldError::InvalidSpec("input frame duration must be > 0".into()));
        }
        if time_pool == 0 || tracks == 0 || classes == 0 {
            return Err(SeldError::InvalidSpec("time pool, tracks and classes must be >= 1".into()));
        }
        let output = OutputSpec {
            frames: input.frames.div_ceil(time_pool),
            tracks,
            classes,
            frame_seconds: input.frame_seconds * time_pool as f64,
        };
        let mut weights = Vec::new();
        let mut template = None;
        let name;
        match &behavior {
            MockBehavior::Zeros => name = "mock-zeros".to_string(),
            MockBehavior::FixedLinear { seed } => {
                name = format!("mock-linear-{seed}");
                let rows = tracks * classes * 3;
                let cols = input.channels * input.bins;
                let scale = 1.0 / (cols as f64).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                weights = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
            }
            MockBehavior::Scripted { events } => {
                name = "mock-scripted".to_string();
                template = Some(script_output(&output, events)?);
            }
            MockBehavior::Delay { seconds } => {
                if !(*seconds >= 0.0 && seconds.is_finite()) {
                    return Err(SeldError::InvalidSpec(format!("delay must be >= 0, got {seconds}")));
                }
                name = format!("mock-delay-{seconds}");
            }
            MockBehavior::Failing { .. } => name = "mock-failing".to_string(),
        }
        Ok(Self {
            name,
            input,
            output,
            time_pool,
            behavior,
            weights,
            template,
        })
    }

    pub fn behavior(&self) -> &MockBehavior {
        &self.behavior
    }

    pub fn time_pool(&self) -> usize {
        self.time_pool
    }

    fn zeros(&self) -> MultiAccdoaOutput {
        MultiAccdoaOutput::zeros(self.output.frames, self.output.tracks, self.output.classes, self.output.frame_seconds)
    }

    fn linear(&self, features: &FeatureTensor) -> Result<MultiAccdoaOutput> {
        let (c, t, b) = features.shape();
        let cols = c * b;
        let rows = self.output.tracks * self.output.classes * 3;
        let mut values = Vec::with_capacity(self.output.frames * rows);
        let mut pooled = vec![0.0; cols];
        for frame in 0..self.output.frames {
            let (start, end) = (frame * self.time_pool, ((frame + 1) * self.time_pool).min(t));
            pooled.fill(0.0);
            for ch in 0..c {
                for tt in start..end {
                    for bin in 0..b {
                        pooled[ch * b + bin] += features.get(ch, tt, bin);
                    }
                }
            }
            let n = (end - start) as f64;
            pooled.iter_mut().for_each(|v| *v /= n);
            for row in self.weights.chunks_exact(cols) {
                values.push(row.iter().zip(&pooled).map(|(w, x)| w * x).sum());
            }
        }
        MultiAccdoaOutput::from_values(
            self.output.frames,
            self.output.tracks,
            self.output.classes,
            self.output.frame_seconds,
            values,
        )
    }
}

fn script_output(spec: &OutputSpec, events: &[ScriptedEvent]) -> Result<MultiAccdoaOutput> {
    let mut out = MultiAccdoaOutput::zeros(spec.frames, spec.tracks, spec.classes, spec.frame_seconds);
    let mut used = vec![0usize; spec.frames * spec.classes];
    for e in events {
        if e.frame >= spec.frames || e.class_id >= spec.classes {
            return Err(SeldError::InvalidSpec(format!(
                "scripted event (frame {}, class {}) outside {} frames x {} classes",
                e.frame, e.class_id, spec.frames, spec.classes
            )));
        }
        let dir = normalize(e.direction)
            .ok_or_else(|| SeldError::InvalidSpec("scripted event has a zero direction".into()))?;
        let slot = &mut used[e.frame * spec.classes + e.class_id];
        if *slot == spec.tracks {
            return Err(SeldError::InvalidSpec(format!(
                "more than {} scripted events for class {} in frame {}",
                spec.tracks, e.class_id, e.frame
            )));
        }
        out.set_vector(e.frame, *slot, e.class_id, dir);
        *slot += 1;
    }
    Ok(out)
}

impl ModelBackend for MockBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_spec(&self) -> &InputSpec {
        &self.input
    }

    fn output_spec(&self) -> &OutputSpec {
        &self.output
    }

    fn infer(&mut self, features: &FeatureTensor) -> Result<MultiAccdoaOutput> {
        match &self.behavior {
            MockBehavior::Zeros => Ok(self.zeros()),
            MockBehavior::FixedLinear { .. } => self.linear(features),
            MockBehavior::Scripted { .. } => Ok(self.template.clone().expect("scripted template")),
            MockBehavior::Delay { seconds } => {
                sleep_at_least(*seconds);
                Ok(self.zeros())
            }
            MockBehavior::Failing { message } => Err(SeldError::BackendFailure(message.clone())),
        }
    }
}

fn sleep_at_least(seconds: f64) {
    let deadline = Instant::now() + Duration::from_secs_f64(seconds);
    loop {
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        std::thread::sleep(deadline - now);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureLayout;
    use crate::inference::{decode_multi_accdoa, DecodeConfig};

    fn spec(kind: FeatureKind, c: usize, b: usize) -> InputSpec {
        InputSpec {
            kind,
            channels: c,
            frames: 160,
            bins: b,
            frame_seconds: 0.0125,
        }
    }

    fn features(kind: FeatureKind, c: usize, b: usize, seed: u64) -> FeatureTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..c * 160 * b).map(|_| rng.gen_range(-5.0..5.0)).collect();
        FeatureTensor::new(kind, c, 160, b, values, FeatureLayout::infer(kind, c, b).unwrap()).unwrap()
    }

    #[test]
    fn zeros_backend() {
        let mut be = make_mock_backend(spec(FeatureKind::MelGcc, 10, 128), MockBehavior::Zeros).unwrap();
        let (out, secs) = run_backend(&mut be, &features(FeatureKind::MelGcc, 10, 128, 0)).unwrap();
        assert_eq!(out.frames(), 20);
        assert!((out.frame_seconds() - 0.1).abs() < 1e-12);
        assert!(out.values().iter().all(|&v| v == 0.0));
        assert!(secs >= 0.0);
    }

    #[test]
    fn spec_mismatch() {
        let mut be = make_mock_backend(spec(FeatureKind::MelGcc, 10, 128), MockBehavior::Zeros).unwrap();
        let err = run_backend(&mut be, &features(FeatureKind::SalsaLite, 7, 191, 0)).unwrap_err();
        assert!(matches!(err, SeldError::SpecMismatch { .. }), "{err}");
    }

    #[test]
    fn linear_is_deterministic_and_seed_sensitive() {
        let input = features(FeatureKind::SalsaLite, 7, 191, 3);
        let s = spec(FeatureKind::SalsaLite, 7, 191);
        let mut a = make_mock_backend(s, MockBehavior::FixedLinear { seed: 42 }).unwrap();
        let first = run_backend(&mut a, &input).unwrap().0;
        for _ in 0..10 {
            let mut fresh = make_mock_backend(s, MockBehavior::FixedLinear { seed: 42 }).unwrap();
            assert_eq!(run_backend(&mut fresh, &input).unwrap().0.values(), first.values());
            assert_eq!(run_backend(&mut a, &input).unwrap().0.values(), first.values());
        }
        let mut one = make_mock_backend(s, MockBehavior::FixedLinear { seed: 1 }).unwrap();
        let mut two = make_mock_backend(s, MockBehavior::FixedLinear { seed: 2 }).unwrap();
        assert_ne!(
            run_backend(&mut one, &input).unwrap().0.values(),
            run_backend(&mut two, &input).unwrap().0.values()
        );
    }

    #[test]
    fn linear_matches_naive_projection() {
        let s = InputSpec {
            kind: FeatureKind::SalsaMel,
            channels: 3,
            frames: 10,
            bins: 2,
            frame_seconds: 0.0125,
        };
        let values: Vec<f64> = (0..60).map(|v| v as f64 * 0.1).collect();
        let f = FeatureTensor::new(FeatureKind::SalsaMel, 3, 10, 2, values, FeatureLayout::infer(FeatureKind::SalsaMel, 3, 2).unwrap()).unwrap();
        let mut be = MockBackend::new(s, MockBehavior::FixedLinear { seed: 9 }, 4, 1, 1).unwrap();
        let out = be.infer(&f).unwrap();
        assert_eq!(out.frames(), 3);
        // last output frame pools the two trailing input frames
        for (o, range) in [(0, 0..4), (2, 8..10)] {
            let n = range.len() as f64;
            for axis in 0..3 {
                let mut acc = 0.0;
                for ch in 0..3 {
                    for bin in 0..2 {
                        let mean: f64 = range.clone().map(|t| f.get(ch, t, bin)).sum::<f64>() / n;
                        acc += be.weights[axis * 6 + ch * 2 + bin] * mean;
                    }
                }
                assert!((out.vector(o, 0, 0)[axis] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scripted_round_trip() {
        let events: Vec<ScriptedEvent> = (0..10)
            .map(|frame| ScriptedEvent { frame, class_id: 3, direction: [1.0, 0.0, 0.0] })
            .collect();
        let s = spec(FeatureKind::MelGcc, 10, 128);
        let mut be = make_mock_backend(s, MockBehavior::Scripted { events: events.clone() }).unwrap();
        let (out, _) = run_backend(&mut be, &features(FeatureKind::MelGcc, 10, 128, 1)).unwrap();
        let decoded = decode_multi_accdoa(&out, &DecodeConfig::default());
        assert_eq!(decoded.len(), 10);
        for (d, e) in decoded.iter().zip(&events) {
            assert_eq!((d.frame, d.class_id, d.direction), (e.frame, e.class_id, e.direction));
        }
    }

    #[test]
    fn scripted_validation() {
        let s = spec(FeatureKind::MelGcc, 10, 128);
        let far = ScriptedEvent { frame: 20, class_id: 0, direction: [1.0, 0.0, 0.0] };
        assert!(matches!(
            make_mock_backend(s, MockBehavior::Scripted { events: vec![far] }),
            Err(SeldError::InvalidSpec(_))
        ));
        let e = ScriptedEvent { frame: 0, class_id: 0, direction: [0.0, 1.0, 0.0] };
        assert!(make_mock_backend(s, MockBehavior::Scripted { events: vec![e; 4] }).is_err());
        assert!(make_mock_backend(s, MockBehavior::Scripted { events: vec![e; 3] }).is_ok());
    }

    #[test]
    fn delay_sleeps() {
        let s = spec(FeatureKind::MelGcc, 10, 128);
        let mut be = make_mock_backend(s, MockBehavior::Delay { seconds: 0.2 }).unwrap();
        let (_, secs) = run_backend(&mut be, &features(FeatureKind::MelGcc, 10, 128, 0)).unwrap();
        assert!((0.2..0.4).contains(&secs), "{secs}");
    }

    #[test]
    fn behavior_parsing() {
        assert_eq!("zeros".parse::<MockBehavior>().unwrap(), MockBehavior::Zeros);
        assert_eq!("linear:42".parse::<MockBehavior>().unwrap(), MockBehavior::FixedLinear { seed: 42 });
        assert_eq!("delay:1.2".parse::<MockBehavior>().unwrap(), MockBehavior::Delay { seconds: 1.2 });
        assert!("delay:-1".parse::<MockBehavior>().is_err());
        assert!("linear".parse::<MockBehavior>().is_err());
        assert!("onnx:model".parse::<MockBehavior>().is_err());
    }

    #[test]
    fn scripted_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("script.csv");
        std::fs::write(&csv, "0,3,0,0\n1,3,90,0\n").unwrap();
        match behavior_from_spec(&format!("scripted:{}", csv.display())).unwrap() {
            MockBehavior::Scripted { events } => {
                assert_eq!(events.len(), 2);
                assert!((events[1].direction[1] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let json = dir.path().join("script.json");
        std::fs::write(&json, r#"[{"frame": 2, "class_id": 1, "direction": [0.0, 0.0, 1.0]}]"#).unwrap();
        assert!(matches!(
            behavior_from_spec(&format!("scripted:{}", json.display())).unwrap(),
            MockBehavior::Scripted { .. }
        ));
        assert!(behavior_from_spec("scripted:/nonexistent/file.csv").is_err());
        assert_eq!(behavior_from_spec("zeros").unwrap(), MockBehavior::Zeros);
    }

    #[test]
    fn failing_backend() {
        let s = spec(FeatureKind::MelGcc, 10, 128);
        let mut be = make_mock_backend(s, "fail".parse().unwrap()).unwrap();
        assert!(matches!(
            run_backend(&mut be, &features(FeatureKind::MelGcc, 10, 128, 0)),
            Err(SeldError::BackendFailure(_))
        ));
    }
}
