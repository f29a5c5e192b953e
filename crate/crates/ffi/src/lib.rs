// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over `vass`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free`. Every fallible call returns a [`VassStatus`]; on
//! failure the message is kept per thread and read with
//! [`vass_last_error_message`]. Panics are caught and reported as
//! [`VassStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use vass::circumplex::{fit_circle_with, CircleOptions};
use vass::corpus_store::{read_tensor_dump, RatingSource, RatingTable, TensorDump};
use vass::steering_vectors::build_sets_from_dump;
use vass::toy_model::{generate, GenerateOptions, SteeringSpec, ToyModel};
use vass::va_subspace::{fit_va_axes, project, resolve_mu, FitOptions, MuMode, VAAxes};
use vass::VassError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VassStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidData = 3,
    Numeric = 4,
    NotFound = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Other = 9,
}

/// A loaded VATD1 tensor dump.
pub struct VassDump(TensorDump);

/// Fitted valence/arousal axes for one layer.
pub struct VassAxes(VAAxes);

/// A toy transformer loaded from a dump.
pub struct VassModel(ToyModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VassCircle {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub rmse: f64,
    pub nrmse: f64,
    pub circularity: f64,
}

struct Failure(VassStatus, String);

impl From<VassError> for Failure {
    fn from(e: VassError) -> Self {
        let status = match &e {
            VassError::InvalidArgument(_) | VassError::DimensionMismatch { .. } => VassStatus::InvalidArgument,
            VassError::InvalidData(_)
            | VassError::Parse { .. }
            | VassError::DuplicateId(_)
            | VassError::MissingRatings(_)
            | VassError::BadMagic
            | VassError::UnsupportedVersion { .. }
            | VassError::Checksum(_)
            | VassError::Header(_)
            | VassError::Json(_)
            | VassError::Csv(_) => VassStatus::InvalidData,
            VassError::UndefinedCorrelation(_) | VassError::DegenerateAxes { .. } | VassError::Singular(_) => {
                VassStatus::Numeric
            }
            VassError::NotFound(_) => VassStatus::NotFound,
            VassError::Io(_) => VassStatus::Io,
            _ => VassStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: VassStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VassStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VassStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            VassStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(VassStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VassStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(VassStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(VassStatus::NullPointer, format!("{what} handle is NULL")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(VassStatus::NullPointer, format!("{what} out-pointer is NULL")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vass_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vass_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn vass_dump_open(path: *const c_char, out: *mut *mut VassDump) -> VassStatus {
    guard(|| {
        let out = out_ptr(out, "dump")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let dump = read_tensor_dump(&path)?;
        *out = Box::into_raw(Box::new(VassDump(dump)));
        Ok(())
    })
}

/// # Safety
/// `dump` must come from [`vass_dump_open`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn vass_dump_free(dump: *mut VassDump) {
    if !dump.is_null() {
        drop(Box::from_raw(dump));
    }
}

/// Number of `f32` values in tensor `name`.
///
/// # Safety
/// Pointers must be valid; `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn vass_dump_tensor_len(
    dump: *const VassDump,
    name: *const c_char,
    out_len: *mut usize,
) -> VassStatus {
    guard(|| {
        let dump = handle(dump, "dump")?;
        let out_len = out_ptr(out_len, "length")?;
        *out_len = dump.0.require(str_arg(name, "name")?)?.data.len();
        Ok(())
    })
}

/// Copies tensor `name` into `buf`, which must hold at least its length.
///
/// # Safety
/// `buf` must be writable for `cap` floats.
#[no_mangle]
pub unsafe extern "C" fn vass_dump_tensor_read(
    dump: *const VassDump,
    name: *const c_char,
    buf: *mut f32,
    cap: usize,
) -> VassStatus {
    guard(|| {
        let dump = handle(dump, "dump")?;
        let t = dump.0.require(str_arg(name, "name")?)?;
        if cap < t.data.len() {
            return Err(fail(
                VassStatus::BufferTooSmall,
                format!("tensor `{}` has {} values, buffer holds {cap}", t.name, t.data.len()),
            ));
        }
        if !t.data.is_empty() {
            let buf = out_ptr(buf, "buffer")?;
            std::ptr::copy_nonoverlapping(t.data.as_ptr(), buf, t.data.len());
        }
        Ok(())
    })
}

/// Fits axes at `layer` of an activation dump against a rating CSV, with
/// the grand mean as center. `k = 0` or a negative `lambda` take defaults.
///
/// # Safety
/// Pointers must be valid; `ratings_path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn vass_axes_fit(
    dump: *const VassDump,
    ratings_path: *const c_char,
    layer: usize,
    k: usize,
    lambda: f64,
    out: *mut *mut VassAxes,
) -> VassStatus {
    guard(|| {
        let dump = handle(dump, "dump")?;
        let out = out_ptr(out, "axes")?;
        let ratings = RatingTable::load_csv(&PathBuf::from(str_arg(ratings_path, "ratings_path")?), RatingSource::HumanNorms)?;
        let set = build_sets_from_dump(&dump.0, None)?
            .into_iter()
            .find(|s| s.layer == layer)
            .ok_or_else(|| fail(VassStatus::NotFound, format!("no activations at layer {layer}")))?;
        let defaults = FitOptions::default();
        let opts = FitOptions {
            k: if k == 0 { defaults.k } else { k },
            lambda: if lambda < 0.0 { defaults.lambda } else { lambda },
        };
        let mu = resolve_mu(MuMode::GrandMean, &set, Some(&dump.0))?;
        let axes = fit_va_axes(&set, &ratings, opts, &mu)?;
        *out = Box::into_raw(Box::new(VassAxes(axes)));
        Ok(())
    })
}

/// # Safety
/// `axes` must come from [`vass_axes_fit`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn vass_axes_free(axes: *mut VassAxes) {
    if !axes.is_null() {
        drop(Box::from_raw(axes));
    }
}

/// Hidden size of the axes, or 0 for a NULL handle.
///
/// # Safety
/// `axes` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn vass_axes_hidden(axes: *const VassAxes) -> usize {
    axes.as_ref().map_or(0, |a| a.0.hidden())
}

/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vass_axes_recovery(axes: *const VassAxes, r_v: *mut f64, r_a: *mut f64) -> VassStatus {
    guard(|| {
        let axes = handle(axes, "axes")?;
        *out_ptr(r_v, "r_v")? = axes.0.recovery_r_v;
        *out_ptr(r_a, "r_a")? = axes.0.recovery_r_a;
        Ok(())
    })
}

/// Copies the unit valence and arousal directions; `len` must equal the
/// hidden size.
///
/// # Safety
/// `v_out` and `a_out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vass_axes_directions(
    axes: *const VassAxes,
    v_out: *mut f64,
    a_out: *mut f64,
    len: usize,
) -> VassStatus {
    guard(|| {
        let axes = handle(axes, "axes")?;
        if len != axes.0.hidden() {
            return Err(fail(
                VassStatus::InvalidArgument,
                format!("length {len} does not match hidden size {}", axes.0.hidden()),
            ));
        }
        let v = out_ptr(v_out, "v_out")?;
        let a = out_ptr(a_out, "a_out")?;
        std::ptr::copy_nonoverlapping(axes.0.v_dir.as_ptr(), v, len);
        std::ptr::copy_nonoverlapping(axes.0.a_dir.as_ptr(), a, len);
        Ok(())
    })
}

/// Valence and arousal coordinates of a hidden state.
///
/// # Safety
/// `h` must be readable for `len` doubles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn vass_axes_project(
    axes: *const VassAxes,
    h: *const f64,
    len: usize,
    valence: *mut f64,
    arousal: *mut f64,
) -> VassStatus {
    guard(|| {
        let axes = handle(axes, "axes")?;
        let p = project(slice_arg(h, len, "h")?, &axes.0)?;
        *out_ptr(valence, "valence")? = p.valence;
        *out_ptr(arousal, "arousal")? = p.arousal;
        Ok(())
    })
}

/// Least-squares circle through `n` points; `refine` adds geometric
/// refinement after the algebraic fit.
///
/// # Safety
/// `xs` and `ys` must be readable for `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vass_fit_circle(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    refine: bool,
    out: *mut VassCircle,
) -> VassStatus {
    guard(|| {
        let out = out_ptr(out, "circle")?;
        let xs = slice_arg(xs, n, "xs")?;
        let ys = slice_arg(ys, n, "ys")?;
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let fit = fit_circle_with(
            &points,
            CircleOptions {
                refine,
                ..CircleOptions::default()
            },
        )?;
        *out = VassCircle {
            center_x: fit.center.0,
            center_y: fit.center.1,
            radius: fit.radius,
            rmse: fit.rmse,
            nrmse: fit.nrmse,
            circularity: fit.circularity,
        };
        Ok(())
    })
}

/// # Safety
/// `dump` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vass_model_from_dump(dump: *const VassDump, out: *mut *mut VassModel) -> VassStatus {
    guard(|| {
        let dump = handle(dump, "dump")?;
        let out = out_ptr(out, "model")?;
        *out = Box::into_raw(Box::new(VassModel(ToyModel::from_dump(&dump.0)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`vass_model_from_dump`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn vass_model_free(model: *mut VassModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hidden size, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn vass_model_hidden(model: *const VassModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.config().hidden)
}

/// Layer count, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn vass_model_layers(model: *const VassModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.config().layers)
}

/// Greedy continuation of `prompt`, steered by `alpha` along the unit
/// `direction` at every layer (pass NULL for none). The text is written
/// NUL-terminated; `written` receives its byte length without the NUL.
/// When `cap` is too small, `written` still receives the needed length.
///
/// # Safety
/// `direction` must be readable for `dir_len` doubles, `buf` writable for
/// `cap` bytes, `written` writable.
#[no_mangle]
pub unsafe extern "C" fn vass_model_generate(
    model: *const VassModel,
    prompt: *const c_char,
    direction: *const f64,
    dir_len: usize,
    alpha: f64,
    max_new: usize,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> VassStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let written = out_ptr(written, "written")?;
        let tokens = model.vocab().encode(str_arg(prompt, "prompt")?);
        let mut opts = GenerateOptions::new(max_new);
        if !direction.is_null() {
            let d = slice_arg(direction, dir_len, "direction")?;
            opts.steering = Some(SteeringSpec::all_layers(model.config().layers, d, alpha));
        }
        let record = generate(model, &tokens, &opts)?;
        let text = model.vocab().render(&record.generated);
        *written = text.len();
        if cap < text.len() + 1 {
            return Err(fail(
                VassStatus::BufferTooSmall,
                format!("output needs {} bytes, buffer holds {cap}", text.len() + 1),
            ));
        }
        let buf = out_ptr(buf, "buffer")?;
        std::ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
        *(buf as *mut c_char).add(text.len()) = 0;
        Ok(())
    })
}
