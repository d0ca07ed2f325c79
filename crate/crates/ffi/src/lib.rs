//! C ABI for loading trained models, extracting features, classifying
//! frames and driving reservoirs.
//!
//! Every fallible function returns a [`HetesnStatus`]; on failure a message
//! is available from [`hetesn_last_error`] on the same thread. Objects are
//! opaque handles created by `*_load`/`*_extract` functions and released
//! with the matching `*_free`. Matrices cross the boundary as row-major
//! `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hetesn::dsp::io::read_wav;
use hetesn::dsp::{FeatureConfig, FeatureExtractor, FeatureMatrix};
use hetesn::pipeline::TrainedModel;
use hetesn::reservoir::{ModelContainer, Reservoir};
use hetesn::Error;
use nalgebra::DMatrix;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HetesnStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad configuration, dimensions or argument values.
    InvalidArgument = 2,
    /// A file could not be read or written.
    Io = 3,
    /// A file was read but its contents are malformed.
    Format = 4,
    /// Non-finite values or a failed numerical routine.
    Numerical = 5,
    /// The caller's output buffer is too small.
    BufferTooSmall = 6,
    /// An internal error; the call had no effect.
    Internal = 7,
}

/// A trained model: reservoir, readout and feature settings.
pub struct HetesnModel(TrainedModel);

/// A reservoir without readout.
pub struct HetesnReservoir(Reservoir);

/// A frame-by-feature matrix produced by feature extraction.
pub struct HetesnFeatures {
    rows: usize,
    cols: usize,
    row_major: Vec<f64>,
}

struct Failure(HetesnStatus, String);

/// Wrapped errors take the status of the error they wrap.
fn status_of(e: &Error) -> HetesnStatus {
    match e {
        Error::Io { .. } | Error::Wav { .. } => HetesnStatus::Io,
        Error::Format { .. } => HetesnStatus::Format,
        Error::Numerical { .. } => HetesnStatus::Numerical,
        Error::Utterance { source, .. } | Error::Trial { source, .. } => status_of(source),
        _ => HetesnStatus::InvalidArgument,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, converting errors and panics into a status and message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HetesnStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (HetesnStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(_) => (HetesnStatus::Internal, "internal panic".to_string()),
    };
    set_last_error(&msg);
    status
}

fn null(what: &str) -> Failure {
    Failure(HetesnStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HetesnStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

/// # Safety
/// `data` is null or points to `len` readable doubles.
unsafe fn matrix_arg(data: *const f64, rows: usize, cols: usize) -> Result<DMatrix<f64>, Failure> {
    if data.is_null() {
        return Err(null("input matrix"));
    }
    let len =
        rows.checked_mul(cols).ok_or_else(|| Failure(HetesnStatus::InvalidArgument, "matrix size overflows".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, std::slice::from_raw_parts(data, len)))
}

/// # Safety
/// `out` is null or writable.
unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// The message of the last failed call on this thread, or an empty string.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hetesn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hetesn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a trained model saved by `hetesn train`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hetesn_model_load(path: *const c_char, out: *mut *mut HetesnModel) -> HetesnStatus {
    guard(|| {
        let model = TrainedModel::load(&path_arg(path)?)?;
        put(out, HetesnModel(model))
    })
}

/// # Safety
/// `model` is null or a handle from [`hetesn_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hetesn_model_free(model: *mut HetesnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Features per frame the model expects (before context stacking), or 0
/// for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_model_n_features(model: *const HetesnModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_features())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_model_n_classes(model: *const HetesnModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_classes)
}

/// Classifies every frame of one utterance. `features` is row-major
/// `n_frames x n_features`; `labels` receives `n_frames` class indices.
///
/// # Safety
/// `model` is a live handle; `features` holds `n_frames * n_features`
/// doubles; `labels` has room for `n_frames` values.
#[no_mangle]
pub unsafe extern "C" fn hetesn_model_classify(
    model: *const HetesnModel,
    features: *const f64,
    n_frames: usize,
    n_features: usize,
    labels: *mut u32,
) -> HetesnStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if labels.is_null() {
            return Err(null("labels"));
        }
        let x = matrix_arg(features, n_frames, n_features)?;
        let predicted = model.0.predict_frames(&x)?;
        std::slice::from_raw_parts_mut(labels, n_frames).copy_from_slice(&predicted);
        Ok(())
    })
}

/// Copies the model's reservoir into a new handle.
///
/// # Safety
/// `model` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hetesn_model_reservoir(
    model: *const HetesnModel,
    out: *mut *mut HetesnReservoir,
) -> HetesnStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        put(out, HetesnReservoir(model.0.reservoir.clone()))
    })
}

/// Loads the reservoir from a model container, ignoring any readout.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hetesn_reservoir_load(path: *const c_char, out: *mut *mut HetesnReservoir) -> HetesnStatus {
    guard(|| {
        let c = ModelContainer::load(&path_arg(path)?)?;
        put(out, HetesnReservoir(c.reservoir))
    })
}

/// # Safety
/// `reservoir` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_reservoir_free(reservoir: *mut HetesnReservoir) {
    if !reservoir.is_null() {
        drop(Box::from_raw(reservoir));
    }
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `reservoir` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_reservoir_n_in(reservoir: *const HetesnReservoir) -> usize {
    reservoir.as_ref().map_or(0, |r| r.0.n_in())
}

/// Length of the concatenated state vector, or 0 for a null handle.
///
/// # Safety
/// `reservoir` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_reservoir_state_dim(reservoir: *const HetesnReservoir) -> usize {
    reservoir.as_ref().map_or(0, |r| r.0.state_dim())
}

/// Runs the reservoir from the zero state over `n_steps` inputs (row-major
/// `n_steps x n_in`) and writes the `n_steps x state_dim` states row-major
/// into `states`, whose capacity in doubles is `states_len`.
///
/// # Safety
/// `reservoir` is a live handle; `inputs` holds `n_steps * n_in` doubles;
/// `states` has room for `states_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hetesn_reservoir_run(
    reservoir: *const HetesnReservoir,
    inputs: *const f64,
    n_steps: usize,
    n_in: usize,
    states: *mut f64,
    states_len: usize,
) -> HetesnStatus {
    guard(|| {
        let r = &reservoir.as_ref().ok_or_else(|| null("reservoir"))?.0;
        if states.is_null() {
            return Err(null("states"));
        }
        let needed = n_steps * r.state_dim();
        if states_len < needed {
            return Err(Failure(
                HetesnStatus::BufferTooSmall,
                format!("states buffer holds {states_len} values, {needed} needed"),
            ));
        }
        let x = r.run_sequence(&matrix_arg(inputs, n_steps, n_in)?, 0)?;
        write_row_major(&x, std::slice::from_raw_parts_mut(states, needed));
        Ok(())
    })
}

fn write_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let cols = m.ncols();
    for ((i, j), v) in (0..m.nrows()).flat_map(|i| (0..cols).map(move |j| (i, j))).zip(out.iter_mut()) {
        *v = m[(i, j)];
    }
}

/// Computes log Bark-band energy features of a mono 16-bit WAV file. With a
/// non-null `model` its recorded front-end settings are used, otherwise the
/// defaults.
///
/// # Safety
/// `wav_path` is a NUL-terminated string; `model` is null or a live handle;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hetesn_features_extract(
    wav_path: *const c_char,
    model: *const HetesnModel,
    out: *mut *mut HetesnFeatures,
) -> HetesnStatus {
    guard(|| {
        let path = path_arg(wav_path)?;
        let config = model.as_ref().map_or_else(FeatureConfig::default, |m| m.0.feature_config());
        let signal = read_wav(&path)?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let fm: FeatureMatrix = FeatureExtractor::new(config, signal.sample_rate)?.extract(&signal, &id)?;
        let (rows, cols) = fm.values.shape();
        let mut row_major = vec![0.0; rows * cols];
        write_row_major(&fm.values, &mut row_major);
        put(out, HetesnFeatures { rows, cols, row_major })
    })
}

/// # Safety
/// `features` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_features_free(features: *mut HetesnFeatures) {
    if !features.is_null() {
        drop(Box::from_raw(features));
    }
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `features` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_features_n_frames(features: *const HetesnFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.rows)
}

/// Features per frame, or 0 for a null handle.
///
/// # Safety
/// `features` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_features_n_features(features: *const HetesnFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.cols)
}

/// Row-major feature values, valid until the handle is freed; null for a
/// null handle.
///
/// # Safety
/// `features` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hetesn_features_data(features: *const HetesnFeatures) -> *const f64 {
    features.as_ref().map_or(ptr::null(), |f| f.row_major.as_ptr())
}
