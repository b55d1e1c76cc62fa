//! C ABI over `seld-rt`.
//!
//! Every fallible function returns a [`SeldStatus`]. On failure the message is
//! available from [`seld_last_error_message`] on the same thread until the next
//! call into the library. Objects handed out through `out` pointers are owned by
//! the caller and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use seld_rt::audio::MultichannelAudio;
use seld_rt::config::AppConfig;
use seld_rt::direction::{az_el_from_unit, Vec3};
use seld_rt::features::{write_tensor_file, FeatureExtractor, FeatureKind, FeatureTensor};
use seld_rt::inference::{decode_multi_accdoa, DecodeConfig, MultiAccdoaOutput};
use seld_rt::metrics::{aggregate_e_seld, angular_distance, compute_seld_metrics, LabelFrameSet};
use seld_rt::pipeline::check_budget;
use seld_rt::SeldError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeldStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    ShapeMismatch = 5,
    Backend = 6,
    Panic = 7,
}

/// Feature set selector. Values match the container kind codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeldFeatureKind {
    MelGcc = 0,
    SalsaLite = 1,
    SalsaMel = 2,
}

impl From<SeldFeatureKind> for FeatureKind {
    fn from(k: SeldFeatureKind) -> Self {
        match k {
            SeldFeatureKind::MelGcc => FeatureKind::MelGcc,
            SeldFeatureKind::SalsaLite => FeatureKind::SalsaLite,
            SeldFeatureKind::SalsaMel => FeatureKind::SalsaMel,
        }
    }
}

impl From<FeatureKind> for SeldFeatureKind {
    fn from(k: FeatureKind) -> Self {
        match k {
            FeatureKind::MelGcc => SeldFeatureKind::MelGcc,
            FeatureKind::SalsaLite => SeldFeatureKind::SalsaLite,
            FeatureKind::SalsaMel => SeldFeatureKind::SalsaMel,
        }
    }
}

/// Opaque feature extractor.
pub struct SeldExtractor {
    inner: FeatureExtractor,
}

/// Opaque `C x T x B` feature tensor.
pub struct SeldTensor {
    inner: FeatureTensor,
}

/// Opaque list of decoded events.
pub struct SeldEventList {
    events: Vec<SeldEvent>,
}

/// One decoded event. `x`, `y`, `z` form a unit vector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeldEvent {
    pub frame: usize,
    pub class_id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub activity: f64,
}

/// Per-window latency accounting, in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeldLatencyReport {
    pub feature_s: f64,
    pub inference_s: f64,
    pub budget_s: f64,
    pub excess_s: f64,
    pub overrun: bool,
}

/// Macro-averaged scores.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeldMetrics {
    pub er: f64,
    pub f1: f64,
    pub le_deg: f64,
    pub lr: f64,
    pub e_seld: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SeldStatus,
    message: String,
}

impl Failure {
    fn new(status: SeldStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn null(name: &str) -> Self {
        Self::new(SeldStatus::NullPointer, format!("{name} is null"))
    }
}

impl From<SeldError> for Failure {
    fn from(e: SeldError) -> Self {
        let status = match &e {
            SeldError::Parse { .. } | SeldError::Json(_) | SeldError::Config(_) => SeldStatus::Parse,
            SeldError::Io(_) | SeldError::MalformedWav(_) => SeldStatus::Io,
            SeldError::ChannelMismatch { .. }
            | SeldError::SampleRateMismatch { .. }
            | SeldError::BlockLengthMismatch { .. }
            | SeldError::InsufficientBlocks { .. }
            | SeldError::DimensionMismatch(_)
            | SeldError::SpecMismatch { .. }
            | SeldError::ShapeInconsistent { .. } => SeldStatus::ShapeMismatch,
            SeldError::BackendFailure(_) => SeldStatus::Backend,
            SeldError::NonUnitDirection(_)
            | SeldError::NonUnitInput(..)
            | SeldError::EmptyInput
            | SeldError::InvalidRange(_)
            | SeldError::TooFewChannels(_)
            | SeldError::InvalidSpec(_)
            | SeldError::ResolutionMismatch(..)
            | SeldError::RangeViolation(_)
            | SeldError::EmptyReference => SeldStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SeldStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            SeldStatus::Ok
        }
        Ok(Err(failure)) => {
            set_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {what}"));
            SeldStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(name))
}

unsafe fn c_path(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(SeldStatus::InvalidArgument, format!("{name} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn seld_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn seld_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Extractor with the default settings (24 kHz, 512-point FFT, hop 300,
/// 128 mel bands, 191 NIPD bins, 4-mic tetrahedral array).
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn seld_extractor_new(out: *mut *mut SeldExtractor) -> SeldStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let inner = FeatureExtractor::with_defaults()?;
        *out = Box::into_raw(Box::new(SeldExtractor { inner }));
        Ok(())
    })
}

/// Extractor built from a JSON configuration document. Missing fields take
/// their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seld_extractor_from_json(json: *const c_char, out: *mut *mut SeldExtractor) -> SeldStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if json.is_null() {
            return Err(Failure::null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure::new(SeldStatus::Parse, "configuration is not UTF-8"))?;
        let cfg = AppConfig::from_json(text)?;
        cfg.validate()?;
        let inner = cfg.features.build()?;
        *out = Box::into_raw(Box::new(SeldExtractor { inner }));
        Ok(())
    })
}

/// # Safety
/// `extractor` must come from `seld_extractor_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn seld_extractor_free(extractor: *mut SeldExtractor) {
    if !extractor.is_null() {
        drop(Box::from_raw(extractor));
    }
}

/// Extracts features from `num_frames` interleaved frames of `num_channels`
/// samples each.
///
/// # Safety
/// `interleaved` must hold `num_frames * num_channels` floats; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seld_extract(
    extractor: *const SeldExtractor,
    kind: SeldFeatureKind,
    interleaved: *const f32,
    num_frames: usize,
    num_channels: usize,
    sample_rate_hz: u32,
    out: *mut *mut SeldTensor,
) -> SeldStatus {
    guard(|| {
        let extractor = borrow(extractor, "extractor")?;
        let out = out_ref(out, "out")?;
        if num_channels == 0 {
            return Err(Failure::new(SeldStatus::InvalidArgument, "num_channels is 0"));
        }
        let len = num_frames
            .checked_mul(num_channels)
            .ok_or_else(|| Failure::new(SeldStatus::InvalidArgument, "sample count overflows"))?;
        let samples = slice(interleaved, len, "interleaved")?;
        let mut channels = vec![Vec::with_capacity(num_frames); num_channels];
        for frame in samples.chunks_exact(num_channels) {
            for (ch, &v) in channels.iter_mut().zip(frame) {
                ch.push(v as f64);
            }
        }
        let audio = MultichannelAudio::from_channels(sample_rate_hz, channels)?;
        let inner = extractor.inner.extract(kind.into(), &audio)?;
        *out = Box::into_raw(Box::new(SeldTensor { inner }));
        Ok(())
    })
}

/// # Safety
/// `tensor` must be valid; each non-null out pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn seld_tensor_shape(
    tensor: *const SeldTensor,
    channels: *mut usize,
    frames: *mut usize,
    bins: *mut usize,
) -> SeldStatus {
    guard(|| {
        let (c, t, b) = borrow(tensor, "tensor")?.inner.shape();
        for (p, v) in [(channels, c), (frames, t), (bins, b)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `tensor` and `kind` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn seld_tensor_kind(tensor: *const SeldTensor, kind: *mut SeldFeatureKind) -> SeldStatus {
    guard(|| {
        *out_ref(kind, "kind")? = borrow(tensor, "tensor")?.inner.kind().into();
        Ok(())
    })
}

/// Copies the tensor, channel-major then frame then bin, into `dst`, which
/// must hold at least `C*T*B` floats (`capacity`).
///
/// # Safety
/// `dst` must be writable for `capacity` floats.
#[no_mangle]
pub unsafe extern "C" fn seld_tensor_copy(tensor: *const SeldTensor, dst: *mut f32, capacity: usize) -> SeldStatus {
    guard(|| {
        let values = borrow(tensor, "tensor")?.inner.values();
        if capacity < values.len() {
            return Err(Failure::new(
                SeldStatus::ShapeMismatch,
                format!("buffer holds {capacity} values, tensor has {}", values.len()),
            ));
        }
        if values.is_empty() {
            return Ok(());
        }
        if dst.is_null() {
            return Err(Failure::null("dst"));
        }
        let dst = std::slice::from_raw_parts_mut(dst, values.len());
        for (d, &v) in dst.iter_mut().zip(values) {
            *d = v as f32;
        }
        Ok(())
    })
}

/// Writes the tensor as a binary feature container.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn seld_tensor_write(tensor: *const SeldTensor, path: *const c_char) -> SeldStatus {
    guard(|| {
        let tensor = borrow(tensor, "tensor")?;
        write_tensor_file(c_path(path, "path")?, &tensor.inner)?;
        Ok(())
    })
}

/// # Safety
/// `tensor` must come from `seld_extract` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn seld_tensor_free(tensor: *mut SeldTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Decodes a multi-ACCDOA output laid out as `[frame][track][class][xyz]`.
///
/// # Safety
/// `values` must hold `frames * tracks * classes * 3` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn seld_decode(
    values: *const f64,
    frames: usize,
    tracks: usize,
    classes: usize,
    frame_seconds: f64,
    threshold: f64,
    merge_angle_deg: f64,
    out: *mut *mut SeldEventList,
) -> SeldStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let len = frames
            .checked_mul(tracks)
            .and_then(|v| v.checked_mul(classes))
            .and_then(|v| v.checked_mul(3))
            .ok_or_else(|| Failure::new(SeldStatus::InvalidArgument, "output size overflows"))?;
        let values = slice(values, len, "values")?;
        let output = MultiAccdoaOutput::from_values(frames, tracks, classes, frame_seconds, values.to_vec())?;
        let config = DecodeConfig::new(threshold, merge_angle_deg)?;
        let events = decode_multi_accdoa(&output, &config)
            .into_iter()
            .map(|e| {
                let [x, y, z] = e.direction;
                let (azimuth_deg, elevation_deg) = az_el_from_unit(e.direction);
                SeldEvent { frame: e.frame, class_id: e.class_id, x, y, z, azimuth_deg, elevation_deg, activity: e.activity }
            })
            .collect();
        *out = Box::into_raw(Box::new(SeldEventList { events }));
        Ok(())
    })
}

/// Number of events in the list; 0 for NULL.
///
/// # Safety
/// `list` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn seld_event_list_len(list: *const SeldEventList) -> usize {
    list.as_ref().map_or(0, |l| l.events.len())
}

/// # Safety
/// `list` and `event` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn seld_event_list_get(list: *const SeldEventList, index: usize, event: *mut SeldEvent) -> SeldStatus {
    guard(|| {
        let list = borrow(list, "list")?;
        let event = out_ref(event, "event")?;
        *event = *list.events.get(index).ok_or_else(|| {
            Failure::new(SeldStatus::InvalidArgument, format!("index {index} out of {} events", list.events.len()))
        })?;
        Ok(())
    })
}

/// # Safety
/// `list` must come from `seld_decode` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn seld_event_list_free(list: *mut SeldEventList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Aggregate SELD error from the four macro scores.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seld_aggregate_e_seld(er: f64, f1: f64, le_deg: f64, lr: f64, out: *mut f64) -> SeldStatus {
    guard(|| {
        *out_ref(out, "out")? = aggregate_e_seld(er, f1, le_deg, lr)?;
        Ok(())
    })
}

/// Angle in degrees between two unit vectors of three doubles each.
///
/// # Safety
/// `u` and `v` must each point to three doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seld_angular_distance(u: *const f64, v: *const f64, out: *mut f64) -> SeldStatus {
    guard(|| {
        let u: Vec3 = slice(u, 3, "u")?.try_into().expect("length 3");
        let v: Vec3 = slice(v, 3, "v")?.try_into().expect("length 3");
        *out_ref(out, "out")? = angular_distance(u, v)?;
        Ok(())
    })
}

/// Compares feature and inference time against the block budget.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seld_check_budget(
    feature_s: f64,
    inference_s: f64,
    budget_s: f64,
    out: *mut SeldLatencyReport,
) -> SeldStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let r = check_budget(feature_s, inference_s, budget_s)?;
        *out = SeldLatencyReport {
            feature_s: r.feature_seconds(),
            inference_s: r.inference_seconds(),
            budget_s: r.budget_seconds(),
            excess_s: r.excess_seconds(),
            overrun: r.overrun,
        };
        Ok(())
    })
}

/// Scores a prediction label CSV against a reference label CSV.
///
/// # Safety
/// Paths must be NUL-terminated UTF-8 strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn seld_evaluate_csv(
    reference_path: *const c_char,
    prediction_path: *const c_char,
    spatial_threshold_deg: f64,
    out: *mut SeldMetrics,
) -> SeldStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let refs = LabelFrameSet::read_csv_file(c_path(reference_path, "reference_path")?)?;
        let preds = LabelFrameSet::read_csv_file(c_path(prediction_path, "prediction_path")?)?;
        let r = compute_seld_metrics(&refs, &preds, spatial_threshold_deg)?;
        *out = SeldMetrics { er: r.er, f1: r.f1, le_deg: r.le_deg, lr: r.lr, e_seld: r.e_seld };
        Ok(())
    })
}
