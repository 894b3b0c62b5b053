//! C interface to the mcpad detector and evaluation helpers.
//!
//! Every function returns an [`McpadStatus`]. On failure the message is
//! available from [`mcpad_last_error_message`] on the same thread until the
//! next failing call. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mcpad::eval::{apcer_of, bpcer_of, threshold_at_apcer, ScoreEntry};
use mcpad::models::MlpModel;
use mcpad::pipeline::load_autoencoders;
use mcpad::preproc::{mad_normalize, stack_channels, FloatPlane, Image8, McFaceImage, Regions, FACE_SIZE};
use mcpad::trainer::PadSystem;
use mcpad::{PadError, Result};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McpadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    ValidationFailed = 4,
    ModelFormat = 5,
    Io = 6,
    Panic = 7,
}

/// Loaded detector: per-region autoencoders plus the MLP.
pub struct McpadSystem {
    inner: PadSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &PadError) -> McpadStatus {
    match err {
        PadError::Shape(_) => McpadStatus::ShapeMismatch,
        PadError::Invalid(_) => McpadStatus::InvalidArgument,
        PadError::Validation(_) | PadError::Json(_) => McpadStatus::ValidationFailed,
        PadError::Format(_) | PadError::Image { .. } => McpadStatus::ModelFormat,
        PadError::Io { .. } => McpadStatus::Io,
        PadError::Sample { source, .. } => status_of(source),
    }
}

struct Failure(McpadStatus, String);

impl From<PadError> for Failure {
    fn from(e: PadError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(McpadStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> std::result::Result<(), Failure>) -> McpadStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => McpadStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            McpadStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> std::result::Result<&'a Path, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure(McpadStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, what: &str) -> std::result::Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn write_out<T>(ptr: *mut T, value: T, what: &str) -> std::result::Result<(), Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

/// Message of the last failed call on this thread; empty when none failed.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn mcpad_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mcpad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads `region_XX.mcae` files from `models_dir` and the MLP from
/// `mlp_path`. `n_regions` is 1, 9 or 16. Release with [`mcpad_system_free`].
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcpad_system_load(
    models_dir: *const c_char,
    mlp_path: *const c_char,
    n_regions: u32,
    out: *mut *mut McpadSystem,
) -> McpadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = path_arg(models_dir, "models_dir")?;
        let mlp = path_arg(mlp_path, "mlp_path")?;
        let regions = Regions::new(n_regions as usize)?;
        let inner = PadSystem::new(regions, load_autoencoders(dir, regions)?, MlpModel::load(mlp)?)?;
        out.write(Box::into_raw(Box::new(McpadSystem { inner })));
        Ok(())
    })
}

/// Frees a system from [`mcpad_system_load`]. Null is ignored.
///
/// # Safety
/// `system` must come from [`mcpad_system_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mcpad_system_free(system: *mut McpadSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

fn face_plane(data: &[u8]) -> Result<Image8> {
    Image8::new(FACE_SIZE, FACE_SIZE, 1, data.to_vec())
}

/// Attack probability of one preprocessed face given as three row-major
/// 128×128 8-bit planes (BW, NIR, depth; or three copies of one plane in
/// single-channel mode).
///
/// # Safety
/// Each plane must point to 128·128 readable bytes; `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcpad_system_score(
    system: *const McpadSystem,
    bw: *const u8,
    nir: *const u8,
    depth: *const u8,
    score: *mut f64,
) -> McpadStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        let n = FACE_SIZE * FACE_SIZE;
        let planes = [
            face_plane(slice_arg(bw, n, "bw")?)?,
            face_plane(slice_arg(nir, n, "nir")?)?,
            face_plane(slice_arg(depth, n, "depth")?)?,
        ];
        let face = McFaceImage::new(stack_channels(&planes[0], &planes[1], &planes[2])?, "ffi", 0)?;
        write_out(score, system.inner.predict(&face)?, "score")
    })
}

/// MAD-normalizes a row-major `width`×`height` plane into 8-bit `out`.
///
/// # Safety
/// `values` and `out` must hold `width·height` elements.
#[no_mangle]
pub unsafe extern "C" fn mcpad_mad_normalize(
    values: *const f64,
    width: usize,
    height: usize,
    sigma: f64,
    out: *mut u8,
) -> McpadStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure(McpadStatus::InvalidArgument, "plane size overflows".into()))?;
        let plane = FloatPlane::new(width, height, slice_arg(values, n, "values")?.to_vec())?;
        let image = mad_normalize(&plane, sigma)?;
        if n > 0 && out.is_null() {
            return Err(null("out"));
        }
        std::ptr::copy_nonoverlapping(image.data().as_ptr(), out, n);
        Ok(())
    })
}

/// Fraction of attack scores below `tau` (classified bona fide).
///
/// # Safety
/// `scores` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcpad_apcer(scores: *const f64, n: usize, tau: f64, out: *mut f64) -> McpadStatus {
    guard(|| write_out(out, apcer_of(slice_arg(scores, n, "scores")?, tau)?, "out"))
}

/// Fraction of bona-fide scores at or above `tau` (classified attack).
///
/// # Safety
/// `scores` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcpad_bpcer(scores: *const f64, n: usize, tau: f64, out: *mut f64) -> McpadStatus {
    guard(|| write_out(out, bpcer_of(slice_arg(scores, n, "scores")?, tau)?, "out"))
}

/// Largest dev threshold whose APCER does not exceed `target`.
/// `is_attack[i]` is nonzero for attack presentations. `attainable` receives
/// 0 when the fallback threshold was used and may be null.
///
/// # Safety
/// `scores` and `is_attack` must hold `n` elements; `tau` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcpad_threshold_at_apcer(
    scores: *const f64,
    is_attack: *const u8,
    n: usize,
    target: f64,
    tau: *mut f64,
    attainable: *mut u8,
) -> McpadStatus {
    guard(|| {
        let scores = slice_arg(scores, n, "scores")?;
        let labels = slice_arg(is_attack, n, "is_attack")?;
        let entries = scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&s, &a))| {
                let label = if a != 0 { mcpad::dataio::Label::Attack } else { mcpad::dataio::Label::BonaFide };
                ScoreEntry::new(i.to_string(), 0, s, label, None)
            })
            .collect::<Result<Vec<_>>>()?;
        let t = threshold_at_apcer(&entries, target)?;
        write_out(tau, t.tau, "tau")?;
        if !attainable.is_null() {
            attainable.write(t.attainable as u8);
        }
        Ok(())
    })
}
