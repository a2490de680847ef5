//! C ABI over the respira core: breathing-rate estimation, window features
//! and prediction with saved model bundles.
//!
//! Every fallible function returns a [`RespiraStatus`]. On failure a
//! description is kept per thread and can be read with
//! [`respira_last_error`]. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use respira::dataset::BreathingType;
use respira::features::{channel_features, BASE_FEATURES};
use respira::models::{ModelBundle, ModelError, Predictor};
use respira::spectral::{estimate_breathing_rate, DEFAULT_BAND};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RespiraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Model = 5,
    Signal = 6,
    Panic = 7,
}

/// A loaded model bundle. Create with [`respira_model_load`] or
/// [`respira_model_from_json`]; release with [`respira_model_free`].
pub struct RespiraModel {
    bundle: ModelBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    // interior NULs would truncate the C string; replace them
    let text = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

type Outcome = Result<(), (RespiraStatus, String)>;

fn fail(status: RespiraStatus, message: impl Into<String>) -> Outcome {
    Err((status, message.into()))
}

fn model_status(e: &ModelError) -> RespiraStatus {
    match e {
        ModelError::Io(_) => RespiraStatus::Io,
        ModelError::Format(_) => RespiraStatus::Format,
        ModelError::DimensionMismatch { .. } => RespiraStatus::InvalidArgument,
        _ => RespiraStatus::Model,
    }
}

/// Runs `body`, turning errors and panics into a status plus last-error text.
fn guard(body: impl FnOnce() -> Outcome) -> RespiraStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RespiraStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RespiraStatus::Panic
        }
    }
}

/// # Safety
/// `data` must be null or point to `len` readable values.
unsafe fn input<'a>(
    data: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (RespiraStatus, String)> {
    if data.is_null() {
        return Err((RespiraStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(data, len))
}

fn check_out<T>(p: *mut T, what: &str) -> Outcome {
    if p.is_null() {
        return fail(RespiraStatus::NullPointer, format!("{what} is null"));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn respira_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn respira_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Name of breathing class `label` ("normal", "panting", "deep"), or null.
#[no_mangle]
pub extern "C" fn respira_class_name(label: usize) -> *const c_char {
    match BreathingType::from_code(label) {
        Some(BreathingType::Normal) => c"normal".as_ptr(),
        Some(BreathingType::Panting) => c"panting".as_ptr(),
        Some(BreathingType::Deep) => c"deep".as_ptr(),
        None => ptr::null(),
    }
}

/// Dominant breathing rate of `signal` in breaths per minute, searched in
/// `[band_lo_hz, band_hi_hz]`. Pass zeros for both to use the default band.
///
/// # Safety
/// `signal` must point to `len` readable values and `out_bpm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respira_estimate_br(
    signal: *const f64,
    len: usize,
    fs_hz: f64,
    band_lo_hz: f64,
    band_hi_hz: f64,
    out_bpm: *mut f64,
) -> RespiraStatus {
    guard(|| {
        check_out(out_bpm, "out_bpm")?;
        let x = input(signal, len, "signal")?;
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return fail(
                RespiraStatus::InvalidArgument,
                format!("sampling rate {fs_hz} must be positive"),
            );
        }
        let band = if band_lo_hz == 0.0 && band_hi_hz == 0.0 {
            DEFAULT_BAND
        } else {
            (band_lo_hz, band_hi_hz)
        };
        let est = estimate_breathing_rate(x, fs_hz, band)
            .map_err(|e| (RespiraStatus::Signal, e.to_string()))?;
        *out_bpm = est.bpm;
        Ok(())
    })
}

/// Number of values [`respira_window_features`] writes.
#[no_mangle]
pub extern "C" fn respira_feature_count(include_br: bool) -> usize {
    BASE_FEATURES + usize::from(include_br)
}

/// Feature vector of one window. `channels` holds five pointers, each to
/// `len` samples, in the order pressure, flow, tidal volume, chest and
/// abdomen circumference. With `include_br` the breathing rate of the tidal
/// volume channel (default band) is appended. `out` must have room for
/// `out_len >= respira_feature_count(include_br)` values.
///
/// # Safety
/// `channels` must point to five readable pointers of `len` values each and
/// `out` to `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn respira_window_features(
    channels: *const *const f64,
    len: usize,
    fs_hz: f64,
    include_br: bool,
    out: *mut f64,
    out_len: usize,
) -> RespiraStatus {
    guard(|| {
        check_out(out, "out")?;
        if channels.is_null() {
            return fail(RespiraStatus::NullPointer, "channels is null");
        }
        if len == 0 {
            return fail(RespiraStatus::InvalidArgument, "window is empty");
        }
        let needed = respira_feature_count(include_br);
        if out_len < needed {
            return fail(
                RespiraStatus::InvalidArgument,
                format!("out holds {out_len} values, {needed} needed"),
            );
        }
        let ptrs = slice::from_raw_parts(channels, 5);
        let mut chans: [&[f64]; 5] = [&[]; 5];
        for (c, &p) in ptrs.iter().enumerate() {
            chans[c] = input(p, len, &format!("channel {c}"))?;
        }
        let mut values = channel_features(chans);
        if include_br {
            let est = estimate_breathing_rate(chans[2], fs_hz, DEFAULT_BAND)
                .map_err(|e| (RespiraStatus::Signal, e.to_string()))?;
            values.push(est.bpm);
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return fail(RespiraStatus::Signal, format!("feature {j} is not finite"));
        }
        slice::from_raw_parts_mut(out, needed).copy_from_slice(&values);
        Ok(())
    })
}

fn boxed(bundle: ModelBundle, out: *mut *mut RespiraModel) {
    // SAFETY: callers checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(RespiraModel { bundle })) };
}

/// Loads a model bundle saved by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn respira_model_load(
    path: *const c_char,
    out: *mut *mut RespiraModel,
) -> RespiraStatus {
    guard(|| {
        check_out(out, "out")?;
        if path.is_null() {
            return fail(RespiraStatus::NullPointer, "path is null");
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            (
                RespiraStatus::InvalidArgument,
                "path is not UTF-8".to_string(),
            )
        })?;
        let bundle = ModelBundle::load(path).map_err(|e| (model_status(&e), e.to_string()))?;
        boxed(bundle, out);
        Ok(())
    })
}

/// Parses a model bundle from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn respira_model_from_json(
    json: *const c_char,
    out: *mut *mut RespiraModel,
) -> RespiraStatus {
    guard(|| {
        check_out(out, "out")?;
        if json.is_null() {
            return fail(RespiraStatus::NullPointer, "json is null");
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (RespiraStatus::Format, "json is not UTF-8".to_string()))?;
        let bundle = ModelBundle::from_json(text).map_err(|e| (model_status(&e), e.to_string()))?;
        boxed(bundle, out);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn respira_model_free(model: *mut RespiraModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input width the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn respira_model_n_features(model: *const RespiraModel) -> usize {
    model.as_ref().map_or(0, |m| m.bundle.model.n_features())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn respira_model_n_classes(model: *const RespiraModel) -> usize {
    model.as_ref().map_or(0, |m| m.bundle.model.n_classes())
}

/// Predicts one unscaled feature vector. The bundled scaler is applied
/// internally. `scores` may be null; otherwise it receives
/// `min(scores_len, n_classes)` class scores.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `len` values, `out_label`
/// must be writable and `scores` null or writable for `scores_len` values.
#[no_mangle]
pub unsafe extern "C" fn respira_model_predict(
    model: *const RespiraModel,
    x: *const f64,
    len: usize,
    out_label: *mut usize,
    scores: *mut f64,
    scores_len: usize,
) -> RespiraStatus {
    guard(|| {
        check_out(out_label, "out_label")?;
        let Some(m) = model.as_ref() else {
            return fail(RespiraStatus::NullPointer, "model is null");
        };
        let x = input(x, len, "x")?;
        let p = m
            .bundle
            .predict(x)
            .map_err(|e| (model_status(&e), e.to_string()))?;
        *out_label = p.label;
        if !scores.is_null() {
            let k = scores_len.min(p.scores.len());
            slice::from_raw_parts_mut(scores, k).copy_from_slice(&p.scores[..k]);
        }
        Ok(())
    })
}
