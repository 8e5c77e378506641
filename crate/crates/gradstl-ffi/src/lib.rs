//! C ABI for the gradstl engine.
//!
//! Signals and formulas are opaque handles created and destroyed
//! through this interface; evaluation results come back through out
//! parameters. Every function returns a [`GradstlStatus`]; on anything
//! other than `Ok`, [`gradstl_last_error`] yields a message for the
//! calling thread. Panics are caught at the boundary and surfaced as a
//! status instead of unwinding into C.
//!
//! Handle lifetimes are the caller's responsibility: a handle stays
//! valid until passed to its `_free` function, and out-pointers are
//! written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gradstl::formula::{parse_formula, Formula};
use gradstl::robustness::{gradient, rstar};
use gradstl::semantics::eval_estar;
use gradstl::signal::{load_signal, Signal};

/// Result of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradstlStatus {
    Ok = 0,
    /// A pointer was null, a buffer was mis-sized, or an index or
    /// parameter was out of range.
    InvalidArgument = 1,
    /// Signal or formula text could not be parsed.
    ParseError = 2,
    /// Evaluation failed (unbound variable, bad gamma, arithmetic
    /// domain error).
    EvalError = 3,
    /// An internal panic was caught at the boundary.
    Panic = 4,
}

/// Opaque signal handle.
pub struct GradstlSignal(Signal);

/// Opaque formula handle.
pub struct GradstlFormula(Formula);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string();
    let c = CString::new(text.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message describing the most recent failure on this thread. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gradstl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn guard(f: impl FnOnce() -> GradstlStatus) -> GradstlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            GradstlStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, GradstlStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is null"));
        return Err(GradstlStatus::InvalidArgument);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_error(format!("{what} is not valid UTF-8"));
            Err(GradstlStatus::InvalidArgument)
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, GradstlStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is null"));
        Err(GradstlStatus::InvalidArgument)
    } else {
        Ok(unsafe { &*ptr })
    }
}

/// Load a signal from a CSV file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// pointer; on `Ok` the caller owns the handle written to `*out` and
/// must release it with [`gradstl_signal_free`].
#[no_mangle]
pub unsafe extern "C" fn gradstl_signal_load(
    path: *const c_char,
    out: *mut *mut GradstlSignal,
) -> GradstlStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return GradstlStatus::InvalidArgument;
        }
        let path = match unsafe { read_str(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_signal(Path::new(path)) {
            Ok(signal) => {
                unsafe { *out = Box::into_raw(Box::new(GradstlSignal(signal))) };
                GradstlStatus::Ok
            }
            Err(e) => {
                set_error(e);
                GradstlStatus::ParseError
            }
        }
    })
}

/// Build a signal from raw arrays: `names` holds `width` variable
/// names, `times` holds `samples` timestamps, and `values` holds
/// `samples * width` entries in row-major order.
///
/// # Safety
/// All pointers must be valid for the stated lengths; `out` as in
/// [`gradstl_signal_load`].
#[no_mangle]
pub unsafe extern "C" fn gradstl_signal_from_data(
    names: *const *const c_char,
    width: usize,
    times: *const f64,
    values: *const f64,
    samples: usize,
    out: *mut *mut GradstlSignal,
) -> GradstlStatus {
    guard(|| {
        if out.is_null() || names.is_null() || times.is_null() || values.is_null() {
            set_error("null pointer argument");
            return GradstlStatus::InvalidArgument;
        }
        let mut owned_names = Vec::with_capacity(width);
        for i in 0..width {
            let name = match unsafe { read_str(*names.add(i), "variable name") } {
                Ok(n) => n,
                Err(status) => return status,
            };
            owned_names.push(name.to_string());
        }
        let times = unsafe { std::slice::from_raw_parts(times, samples) }.to_vec();
        let values = unsafe { std::slice::from_raw_parts(values, samples * width) }.to_vec();
        match Signal::new(owned_names, times, values) {
            Ok(signal) => {
                unsafe { *out = Box::into_raw(Box::new(GradstlSignal(signal))) };
                GradstlStatus::Ok
            }
            Err(e) => {
                set_error(e);
                GradstlStatus::InvalidArgument
            }
        }
    })
}

/// Number of samples in the signal; 0 if the handle is null.
///
/// # Safety
/// `signal` must be null or a live handle from this API.
#[no_mangle]
pub unsafe extern "C" fn gradstl_signal_sample_count(signal: *const GradstlSignal) -> usize {
    if signal.is_null() {
        return 0;
    }
    unsafe { &*signal }.0.sample_count()
}

/// Number of variables per sample; 0 if the handle is null.
///
/// # Safety
/// `signal` must be null or a live handle from this API.
#[no_mangle]
pub unsafe extern "C" fn gradstl_signal_width(signal: *const GradstlSignal) -> usize {
    if signal.is_null() {
        return 0;
    }
    unsafe { &*signal }.0.width()
}

/// Release a signal handle. Null is ignored.
///
/// # Safety
/// `signal` must have come from this API and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn gradstl_signal_free(signal: *mut GradstlSignal) {
    if !signal.is_null() {
        drop(unsafe { Box::from_raw(signal) });
    }
}

/// Parse formula text against the variables of `signal`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string, `signal` a live
/// handle; on `Ok` the caller owns `*out` and must release it with
/// [`gradstl_formula_free`].
#[no_mangle]
pub unsafe extern "C" fn gradstl_formula_parse(
    text: *const c_char,
    signal: *const GradstlSignal,
    out: *mut *mut GradstlFormula,
) -> GradstlStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return GradstlStatus::InvalidArgument;
        }
        let text = match unsafe { read_str(text, "formula text") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let signal = match unsafe { deref(signal, "signal") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match parse_formula(text.trim(), signal.0.names()) {
            Ok(formula) => {
                unsafe { *out = Box::into_raw(Box::new(GradstlFormula(formula))) };
                GradstlStatus::Ok
            }
            Err(e) => {
                set_error(e);
                GradstlStatus::ParseError
            }
        }
    })
}

/// Release a formula handle. Null is ignored.
///
/// # Safety
/// `formula` must have come from [`gradstl_formula_parse`] and not
/// been freed before.
#[no_mangle]
pub unsafe extern "C" fn gradstl_formula_free(formula: *mut GradstlFormula) {
    if !formula.is_null() {
        drop(unsafe { Box::from_raw(formula) });
    }
}

/// Boolean satisfaction at sample `at`; writes 1 or 0 to `out`.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gradstl_check(
    signal: *const GradstlSignal,
    formula: *const GradstlFormula,
    at: usize,
    out: *mut bool,
) -> GradstlStatus {
    guard(|| {
        let (signal, formula) = match unsafe { handles(signal, formula) } {
            Ok(pair) => pair,
            Err(status) => return status,
        };
        if out.is_null() {
            set_error("out is null");
            return GradstlStatus::InvalidArgument;
        }
        match eval_estar(&signal.0, &formula.0, at) {
            Ok((value, _)) => {
                unsafe { *out = value };
                GradstlStatus::Ok
            }
            Err(e) => {
                set_error(e);
                GradstlStatus::EvalError
            }
        }
    })
}

/// Smooth robustness at sample `at` (gamma 0 for the hard semantics).
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gradstl_robustness(
    signal: *const GradstlSignal,
    formula: *const GradstlFormula,
    at: usize,
    gamma: f64,
    out: *mut f64,
) -> GradstlStatus {
    guard(|| {
        let (signal, formula) = match unsafe { handles(signal, formula) } {
            Ok(pair) => pair,
            Err(status) => return status,
        };
        if out.is_null() {
            set_error("out is null");
            return GradstlStatus::InvalidArgument;
        }
        match rstar(&signal.0, &formula.0, at, gamma) {
            Ok(value) => {
                unsafe { *out = value };
                GradstlStatus::Ok
            }
            Err(e) => {
                set_error(e);
                GradstlStatus::EvalError
            }
        }
    })
}

/// Robustness and its gradient at sample `at`. `buffer` receives the
/// partial derivatives in row-major `samples x width` order and
/// `buffer_len` must equal that product exactly.
///
/// # Safety
/// Handles must be live, `out_value` valid, and `buffer` valid for
/// `buffer_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gradstl_gradient(
    signal: *const GradstlSignal,
    formula: *const GradstlFormula,
    at: usize,
    gamma: f64,
    out_value: *mut f64,
    buffer: *mut f64,
    buffer_len: usize,
) -> GradstlStatus {
    guard(|| {
        let (signal, formula) = match unsafe { handles(signal, formula) } {
            Ok(pair) => pair,
            Err(status) => return status,
        };
        if out_value.is_null() || buffer.is_null() {
            set_error("null output pointer");
            return GradstlStatus::InvalidArgument;
        }
        let need = signal.0.sample_count() * signal.0.width();
        if buffer_len != need {
            set_error(format!("buffer_len {buffer_len} does not match {need} entries"));
            return GradstlStatus::InvalidArgument;
        }
        match gradient(&signal.0, &formula.0, at, gamma) {
            Ok((value, tensor)) => {
                unsafe {
                    *out_value = value;
                    ptr::copy_nonoverlapping(tensor.entries().as_ptr(), buffer, need);
                }
                GradstlStatus::Ok
            }
            Err(e) => {
                set_error(e);
                GradstlStatus::EvalError
            }
        }
    })
}

unsafe fn handles<'a>(
    signal: *const GradstlSignal,
    formula: *const GradstlFormula,
) -> Result<(&'a GradstlSignal, &'a GradstlFormula), GradstlStatus> {
    let signal = unsafe { deref(signal, "signal") }?;
    let formula = unsafe { deref(formula, "formula") }?;
    Ok((signal, formula))
}
