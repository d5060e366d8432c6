//! C interface to `mbf-core`.
//!
//! Models and samplers cross the boundary as opaque handles owned by the
//! caller and released with the matching `_free`. Every fallible function
//! returns an [`MbfStatus`]; after a failure, [`mbf_last_error`] describes it
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mbf_core::geometry::GridSpec;
use mbf_core::kernels::{KernelModel, ModelSpec};
use mbf_core::synth::Sampler;
use mbf_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed JSON or parameters outside their domain.
    Config = 3,
    /// Quadrature or factorization failure.
    Numerical = 4,
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// Opaque covariance model.
pub struct MbfModel(KernelModel);

/// Opaque factored sampler for one model on one lattice.
pub struct MbfSampler(Sampler);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: MbfStatus, msg: impl Into<String>) -> MbfStatus {
    set_error(msg);
    status
}

fn from_core(e: Error) -> MbfStatus {
    let status = if e.is_numerical() { MbfStatus::Numerical } else { MbfStatus::Config };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into [`MbfStatus::Internal`].
fn guard(f: impl FnOnce() -> MbfStatus) -> MbfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MbfStatus::Internal, "panic inside mbf"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MbfStatus> {
    if p.is_null() {
        return Err(fail(MbfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(MbfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failure on this thread; empty before any failure.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mbf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a model from its JSON description, e.g.
/// `{"family": {"type": "levy_fbm", "hurst": 0.5, "dim": 1}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbf_model_from_json(json: *const c_char, out: *mut *mut MbfModel) -> MbfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MbfStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let spec: ModelSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail(MbfStatus::Config, e.to_string()),
        };
        match KernelModel::new(spec) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(MbfModel(m)));
                MbfStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `model` must come from [`mbf_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbf_model_free(model: *mut MbfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbf_model_dim(model: *const MbfModel, out: *mut usize) -> MbfStatus {
    if model.is_null() || out.is_null() {
        return fail(MbfStatus::NullPointer, "model or out is null");
    }
    *out = (*model).0.dim();
    MbfStatus::Ok
}

/// Covariance `E[X_s X_t]`; `s` and `t` hold `dim` coordinates each.
///
/// # Safety
/// `s` and `t` must point to `dim` readable doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn mbf_model_cov(
    model: *const MbfModel,
    s: *const f64,
    t: *const f64,
    dim: usize,
    out: *mut f64,
) -> MbfStatus {
    guard(|| {
        if model.is_null() || s.is_null() || t.is_null() || out.is_null() {
            return fail(MbfStatus::NullPointer, "null argument");
        }
        let m = &(*model).0;
        if dim != m.dim() {
            return fail(MbfStatus::InvalidArgument, format!("model has dimension {}, got {dim}", m.dim()));
        }
        let (s, t) = (std::slice::from_raw_parts(s, dim), std::slice::from_raw_parts(t, dim));
        match m.cov(s, t) {
            Ok(v) => {
                *out = v;
                MbfStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Factor `model` on the lattice described by `grid_json`
/// (`{"lower": [...], "upper": [...], "resolution": [...]}`). Lattices above
/// `cap` points are refused unless the model is separable.
///
/// # Safety
/// `model` must be live, `grid_json` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mbf_sampler_new(
    model: *const MbfModel,
    grid_json: *const c_char,
    cap: usize,
    out: *mut *mut MbfSampler,
) -> MbfStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return fail(MbfStatus::NullPointer, "model or out is null");
        }
        *out = ptr::null_mut();
        let text = match str_arg(grid_json, "grid_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let grid: GridSpec = match serde_json::from_str(text) {
            Ok(g) => g,
            Err(e) => return fail(MbfStatus::Config, e.to_string()),
        };
        if let Err(e) = grid.validate() {
            return from_core(e);
        }
        match Sampler::with_cap(&(*model).0, &grid, cap) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(MbfSampler(s)));
                MbfStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `sampler` must come from [`mbf_sampler_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbf_sampler_free(sampler: *mut MbfSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Number of lattice points, i.e. the length one replicate needs.
///
/// # Safety
/// `sampler` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mbf_sampler_len(sampler: *const MbfSampler, out: *mut usize) -> MbfStatus {
    if sampler.is_null() || out.is_null() {
        return fail(MbfStatus::NullPointer, "sampler or out is null");
    }
    *out = (*sampler).0.grid().len();
    MbfStatus::Ok
}

/// Write replicate `replicate` of `seed` into `buf` in row-major order.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mbf_sampler_sample(
    sampler: *const MbfSampler,
    seed: u64,
    replicate: u64,
    buf: *mut f64,
    len: usize,
) -> MbfStatus {
    guard(|| {
        if sampler.is_null() || buf.is_null() {
            return fail(MbfStatus::NullPointer, "sampler or buf is null");
        }
        let s = &(*sampler).0;
        let n = s.grid().len();
        if len < n {
            return fail(MbfStatus::BufferTooSmall, format!("need {n} doubles, got {len}"));
        }
        let sample = s.sample_one(seed, replicate);
        std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&sample.values);
        MbfStatus::Ok
    })
}
