//! Command-line front end: `extract`, `run`, `profile`, `evaluate` and
//! `simulate`.
//!
//! Settings resolve as defaults, then the JSON file given by `--config`,
//! then individual flags. Exit codes: 0 success, 1 runtime failure, 2 usage
//! or parse error.

mod manifest;

pub use manifest::RunManifest;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::audio::{read_wav, simulate_plane_wave, white_noise, write_wav, AudioFormat, SampleEncoding, SimulatedCapture};
use crate::config::AppConfig;
use crate::direction::{rounded_az_el, unit_from_az_el};
use crate::error::{Result, SeldError};
use crate::features::{write_csv, write_tensor_file, FeatureKind};
use crate::inference::{behavior_from_spec, make_mock_backend, InputSpec, ModelBackend};
use crate::metrics::{compute_seld_metrics, LabelFrameSet};
use crate::pipeline::{profile_sweep, run_realtime, window_input_spec, CsvSink, RunMode, SweepOptions};
use manifest::now_ms;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "seld-rt", version, about = "Real-time SELD front-end: features, inference, profiling, metrics")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a feature tensor from a WAV file.
    Extract(ExtractArgs),
    /// Stream a WAV file through the real-time pipeline.
    Run(RunArgs),
    /// Time feature extraction and inference over window lengths.
    Profile(ProfileArgs),
    /// Score predictions against reference labels.
    Evaluate(EvaluateArgs),
    /// Write a plane-wave scene recorded by the configured array.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FeatureFlags {
    #[arg(long)]
    pub sample_rate: Option<u32>,
    #[arg(long)]
    pub fft_size: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub mel_bands: Option<usize>,
    #[arg(long)]
    pub cutoff_bins: Option<usize>,
    /// Clip NIPD values to +/- this many meters.
    #[arg(long)]
    pub nipd_clip: Option<f64>,
}

impl FeatureFlags {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(sr) = self.sample_rate {
            cfg.audio.sample_rate_hz = sr;
            cfg.features.stft.sample_rate_hz = sr;
        }
        if let Some(n) = self.fft_size {
            cfg.features.stft.fft_size = n;
            cfg.features.stft.win_length = n;
        }
        if let Some(h) = self.hop {
            cfg.features.stft.hop = h;
        }
        if let Some(k) = self.mel_bands {
            cfg.features.mel_bands = k;
        }
        if let Some(c) = self.cutoff_bins {
            cfg.features.salsa.cutoff_bins = c;
        }
        if let Some(c) = self.nipd_clip {
            cfg.features.salsa.nipd_clip_m = Some(c);
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, required_unless_present = "from_manifest")]
    pub input: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<FeatureKind>,
    /// Binary feature container to write.
    #[arg(long, required_unless_present = "from_manifest")]
    pub output: Option<PathBuf>,
    /// Also dump the tensor as long-format CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Repeat the extraction recorded in a manifest.
    #[arg(long, conflicts_with_all = ["input", "kind"])]
    pub from_manifest: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureFlags,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Capture block duration T_r in seconds.
    #[arg(long)]
    pub block_seconds: Option<f64>,
    /// Blocks per inference window (n).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub blocks: Option<u64>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<FeatureKind>,
    /// zeros | linear:SEED | scripted:PATH | delay:SECONDS
    #[arg(long, default_value = "zeros")]
    pub backend: String,
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub latency: PathBuf,
    /// Capture on its own thread at wall-clock pace.
    #[arg(long)]
    pub threaded: bool,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub merge_angle: Option<f64>,
    #[command(flatten)]
    pub features: FeatureFlags,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_kind, required = true)]
    pub kinds: Vec<FeatureKind>,
    /// Window lengths T_w in seconds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub windows: Vec<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, default_value = "zeros")]
    pub backend: String,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub block_seconds: Option<f64>,
    #[command(flatten)]
    pub features: FeatureFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub prediction: PathBuf,
    /// Spatial threshold in degrees.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Metrics report JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EncodingArg {
    Pcm16,
    Float32,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub azimuth: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub elevation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub amplitude: f64,
    #[arg(long, value_enum, default_value_t = EncodingArg::Float32)]
    pub encoding: EncodingArg,
    /// Also write a reference label CSV with the source active in every frame.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub class: usize,
}

fn parse_kind(s: &str) -> std::result::Result<FeatureKind, String> {
    s.parse::<FeatureKind>().map_err(|e| e.to_string())
}

/// Exit code for an error surfaced by a command.
pub fn exit_code_for(err: &SeldError) -> i32 {
    match err {
        SeldError::Parse { .. }
        | SeldError::Config(_)
        | SeldError::Json(_)
        | SeldError::ResolutionMismatch(..)
        | SeldError::InvalidRange(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn base_config(cli: &Cli) -> Result<AppConfig> {
    match &cli.config {
        Some(path) => AppConfig::from_file(path),
        None => Ok(AppConfig::default()),
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = base_config(cli)?;
    match &cli.command {
        Command::Extract(a) => cmd_extract(cfg, a, out),
        Command::Run(a) => cmd_run(cfg, a, out),
        Command::Profile(a) => cmd_profile(cfg, a, out),
        Command::Evaluate(a) => cmd_evaluate(cfg, a, out),
        Command::Simulate(a) => cmd_simulate(cfg, a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_extract(mut cfg: AppConfig, a: &ExtractArgs, out: &mut dyn Write) -> Result<()> {
    let started = now_ms();
    let (input, output, csv) = match &a.from_manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            if m.command != "extract" {
                return Err(SeldError::Config(format!("manifest records '{}', not 'extract'", m.command)));
            }
            cfg = m.config;
            let input = m.inputs.first().cloned().ok_or_else(|| SeldError::Config("manifest lists no input".into()))?;
            let output = a
                .output
                .clone()
                .or_else(|| m.outputs.first().cloned())
                .ok_or_else(|| SeldError::Config("manifest lists no output".into()))?;
            (input, output, a.csv.clone())
        }
        None => {
            a.features.apply(&mut cfg);
            if let Some(kind) = a.kind {
                cfg.pipeline.kind = kind;
            }
            (
                a.input.clone().expect("required by clap"),
                a.output.clone().expect("required by clap"),
                a.csv.clone(),
            )
        }
    };
    cfg.validate()?;
    let extractor = cfg.features.build()?;
    let audio = read_wav(&input, cfg.audio)?;
    let tensor = extractor.extract(cfg.pipeline.kind, &audio)?;
    write_tensor_file(&output, &tensor)?;
    let mut manifest = RunManifest::new("extract", &cfg, started);
    manifest.inputs.push(input);
    manifest.outputs.push(output.clone());
    if let Some(csv) = &csv {
        write_csv(File::create(csv)?, &tensor)?;
        manifest.outputs.push(csv.clone());
    }
    manifest.write_next_to(&output)?;
    let (c, t, b) = tensor.shape();
    writeln!(out, "{} {c}x{t}x{b} -> {}", tensor.kind(), output.display())?;
    Ok(())
}

fn build_backend(spec: &str, input: InputSpec) -> Result<Box<dyn ModelBackend>> {
    Ok(Box::new(make_mock_backend(input, behavior_from_spec(spec)?)?))
}

fn cmd_run(mut cfg: AppConfig, a: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let started = now_ms();
    a.features.apply(&mut cfg);
    if let Some(t) = a.block_seconds {
        cfg.pipeline.block_seconds = t;
    }
    if let Some(n) = a.blocks {
        cfg.pipeline.blocks_per_window = n as usize;
    }
    if let Some(kind) = a.kind {
        cfg.pipeline.kind = kind;
    }
    if let Some(t) = a.threshold {
        cfg.pipeline.decode.threshold = t;
    }
    if let Some(m) = a.merge_angle {
        cfg.pipeline.decode.merge_angle_deg = m;
    }
    cfg.validate()?;
    let extractor = cfg.features.build()?;
    let audio = read_wav(&a.input, cfg.audio)?;
    let window_samples = cfg.audio.samples_for(cfg.pipeline.block_seconds) * cfg.pipeline.blocks_per_window;
    let spec = window_input_spec(&extractor, cfg.pipeline.kind, cfg.audio.num_channels, window_samples);
    let mut backend = build_backend(&a.backend, spec)?;

    let capture = SimulatedCapture::new(audio, cfg.pipeline.block_seconds)?;
    let capture = if a.threaded { capture.paced() } else { capture };
    let mode = if a.threaded { RunMode::Threaded } else { RunMode::Deterministic };
    let mut sink = CsvSink::new(create(&a.events)?, create(&a.latency)?)?;
    let summary = run_realtime(capture, cfg.audio, &cfg.pipeline, &extractor, backend.as_mut(), &mut sink, mode)?;
    sink.finish()?;

    let mut manifest = RunManifest::new("run", &cfg, started);
    manifest.settings = json!({
        "backend": a.backend,
        "model": backend.name(),
        "mode": mode,
        "summary": summary,
    });
    manifest.inputs.push(a.input.clone());
    manifest.outputs.extend([a.events.clone(), a.latency.clone()]);
    manifest.write_next_to(&a.events)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn cmd_profile(mut cfg: AppConfig, a: &ProfileArgs, out: &mut dyn Write) -> Result<()> {
    let started = now_ms();
    a.features.apply(&mut cfg);
    if let Some(i) = a.iterations {
        cfg.sweep.iterations = i;
    }
    if let Some(s) = a.seed {
        cfg.sweep.seed = s;
    }
    if let Some(t) = a.block_seconds {
        cfg.pipeline.block_seconds = t;
    }
    cfg.validate()?;
    let extractor = cfg.features.build()?;
    let options = SweepOptions {
        iterations: cfg.sweep.iterations,
        block_seconds: cfg.pipeline.block_seconds,
        format: cfg.audio,
        seed: cfg.sweep.seed,
    };
    let spec = a.backend.clone();
    let mut factory = |input: InputSpec| build_backend(&spec, input);
    let result = profile_sweep(&a.kinds, &a.windows, &extractor, &mut factory, &options)?;
    let mut file = create(&a.output)?;
    result.write_csv(&mut file)?;
    file.flush()?;

    let mut manifest = RunManifest::new("profile", &cfg, started);
    manifest.settings = json!({ "backend": a.backend, "kinds": a.kinds, "windows": a.windows });
    manifest.outputs.push(a.output.clone());
    manifest.write_next_to(&a.output)?;
    result.write_csv(&mut *out)?;
    Ok(())
}

fn cmd_evaluate(mut cfg: AppConfig, a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let started = now_ms();
    if let Some(t) = a.threshold {
        cfg.metrics.spatial_threshold_deg = t;
    }
    let refs = LabelFrameSet::read_csv_file(&a.reference).map_err(|e| in_file(e, &a.reference))?;
    let preds = LabelFrameSet::read_csv_file(&a.prediction).map_err(|e| in_file(e, &a.prediction))?;
    let report = compute_seld_metrics(&refs, &preds, cfg.metrics.spatial_threshold_deg)?;
    write!(out, "{}", report.to_table())?;
    if let Some(path) = &a.output {
        std::fs::write(path, report.to_json()?)?;
        let mut manifest = RunManifest::new("evaluate", &cfg, started);
        manifest.inputs.extend([a.reference.clone(), a.prediction.clone()]);
        manifest.outputs.push(path.clone());
        manifest.write_next_to(path)?;
    }
    Ok(())
}

fn in_file(err: SeldError, path: &Path) -> SeldError {
    match err {
        SeldError::Parse { line, message } => SeldError::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn cmd_simulate(cfg: AppConfig, a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let started = now_ms();
    cfg.validate()?;
    if !(a.seconds > 0.0) {
        return Err(SeldError::InvalidRange("duration must be > 0".into()));
    }
    if !(-90.0..=90.0).contains(&a.elevation) {
        return Err(SeldError::InvalidRange("elevation must be in [-90, 90]".into()));
    }
    let format = AudioFormat::new(cfg.audio.sample_rate_hz, cfg.features.geometry.num_mics())?;
    let source = white_noise(format.samples_for(a.seconds), a.amplitude, a.seed);
    let doa = unit_from_az_el(a.azimuth, a.elevation);
    let audio = simulate_plane_wave(&source, doa, &cfg.features.geometry, format)?;
    let encoding = match a.encoding {
        EncodingArg::Pcm16 => SampleEncoding::Pcm16,
        EncodingArg::Float32 => SampleEncoding::Float32,
    };
    write_wav(&a.output, &audio, encoding)?;
    let mut manifest = RunManifest::new("simulate", &cfg, started);
    manifest.settings = json!({
        "seconds": a.seconds, "azimuth_deg": a.azimuth, "elevation_deg": a.elevation,
        "seed": a.seed, "amplitude": a.amplitude, "class": a.class,
    });
    manifest.outputs.push(a.output.clone());
    if let Some(path) = &a.labels {
        let mut w = create(path)?;
        let (az, el) = rounded_az_el(doa);
        let frames = (a.seconds / crate::metrics::LABEL_FRAME_SECONDS).round() as usize;
        for f in 0..frames {
            writeln!(w, "{f},{},{az},{el}", a.class)?;
        }
        w.flush()?;
        manifest.outputs.push(path.clone());
    }
    manifest.write_next_to(&a.output)?;
    writeln!(out, "{} channels x {} samples -> {}", audio.num_channels(), audio.num_samples(), a.output.display())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with_args(std::iter::once("seld-rt").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_kind_is_a_usage_error() {
        let (code, _, err) = run(&["extract", "--input", "x.wav", "--kind", "bogus", "--output", "y"]);
        assert_eq!(code, EXIT_USAGE, "{err}");
    }

    #[test]
    fn zero_blocks_is_a_usage_error() {
        let (code, _, _) = run(&["run", "--input", "x.wav", "--blocks", "0", "--events", "e", "--latency", "l"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("extract"));
    }

    #[test]
    fn missing_wav_is_a_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("f.sft");
        let (code, _, err) = run(&["extract", "--input", "/nonexistent.wav", "--output", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_RUNTIME, "{err}");
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(exit_code_for(&SeldError::ResolutionMismatch(0.1, 0.2)), EXIT_USAGE);
        assert_eq!(exit_code_for(&SeldError::Parse { line: 3, message: String::new() }), EXIT_USAGE);
        assert_eq!(exit_code_for(&SeldError::BackendFailure("x".into())), EXIT_RUNTIME);
    }
}
