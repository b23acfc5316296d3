//! C ABI for the certification primitives: Gaussian numerics, exact binomial
//! confidence bounds, cost matrices (as opaque handles), and certified radii.
//!
//! Conventions: every fallible function returns a [`CsStatus`] code and
//! writes results through out-pointers; `cs_last_error_message` retrieves a
//! human-readable description of the most recent failure on this thread.
//! Handles returned by `*_new`/`*_parse` functions must be released with the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use cs_smooth::cost::CostMatrix;
use cs_smooth::error::Error;
use cs_smooth::gauss;
use cs_smooth::radius::{self, ProbVector};

/// Result code for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    CsOk = 0,
    /// A pointer argument was null.
    CsNullPointer = 1,
    /// An argument was outside its mathematical domain.
    CsDomain = 2,
    /// An index or class label was out of range.
    CsIndex = 3,
    /// Malformed input (string encoding, matrix shape, shorthand syntax).
    CsFormat = 4,
    /// Invalid configuration value.
    CsConfig = 5,
    /// The requested quantity is undefined for this input.
    CsUndefined = 6,
    /// Any other failure; see `cs_last_error_message`.
    CsInternal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(err: Error) -> CsStatus {
    let code = match &err {
        Error::Domain(_) | Error::Diverged(_) => CsStatus::CsDomain,
        Error::IndexOutOfRange { .. } | Error::DimensionMismatch { .. } => CsStatus::CsIndex,
        Error::Format(_) | Error::Version { .. } | Error::Json(_) => CsStatus::CsFormat,
        Error::Config(_) => CsStatus::CsConfig,
        Error::UndefinedMetric(_) => CsStatus::CsUndefined,
        Error::Io(_) => CsStatus::CsInternal,
    };
    set_error(err.to_string());
    code
}

fn fail_null(what: &str) -> CsStatus {
    set_error(format!("null pointer: {what}"));
    CsStatus::CsNullPointer
}

/// Most recent error message on this thread, or null if none. The pointer is
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Standard Gaussian CDF.
#[no_mangle]
pub extern "C" fn cs_phi(z: f64) -> f64 {
    gauss::phi_raw(z)
}

/// Standard Gaussian quantile. Requires 0 < p < 1; writes through `out`.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_phi_inv(p: f64, out: *mut f64) -> CsStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match gauss::phi_inv(p) {
        Ok(z) => {
            unsafe { *out = z };
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}

/// One-sided lower confidence bound on a binomial proportion from
/// `successes` out of `trials`, holding with the given confidence.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_binom_lower(
    successes: u64,
    trials: u64,
    confidence: f64,
    out: *mut f64,
) -> CsStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match gauss::binom_lower(successes, trials, confidence) {
        Ok(b) => {
            unsafe { *out = b.value };
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}

/// One-sided upper confidence bound; counterpart of [`cs_binom_lower`].
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_binom_upper(
    successes: u64,
    trials: u64,
    confidence: f64,
    out: *mut f64,
) -> CsStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match gauss::binom_upper(successes, trials, confidence) {
        Ok(b) => {
            unsafe { *out = b.value };
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}

/// Opaque binary cost matrix handle.
pub struct CsCostMatrix {
    inner: CostMatrix,
}

/// Parse a cost matrix from shorthand ("overall", "seedwise:3",
/// "pairwise:3->2,4") for `m` classes. On success `*out` owns the handle.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_cost_matrix_parse(
    spec: *const c_char,
    m: usize,
    out: *mut *mut CsCostMatrix,
) -> CsStatus {
    if spec.is_null() {
        return fail_null("spec");
    }
    if out.is_null() {
        return fail_null("out");
    }
    let text = match unsafe { CStr::from_ptr(spec) }.to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("cost matrix spec is not valid UTF-8".into());
            return CsStatus::CsFormat;
        }
    };
    match CostMatrix::parse_shorthand(text, m) {
        Ok(cm) => {
            unsafe { *out = Box::into_raw(Box::new(CsCostMatrix { inner: cm })) };
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}

/// Build a cost matrix from a row-major m*m array of 0/1 entries.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_cost_matrix_new(
    entries: *const u8,
    m: usize,
    out: *mut *mut CsCostMatrix,
) -> CsStatus {
    if entries.is_null() {
        return fail_null("entries");
    }
    if out.is_null() {
        return fail_null("out");
    }
    let flat = unsafe { std::slice::from_raw_parts(entries, m * m) };
    let rows: Vec<Vec<u8>> = flat.chunks(m).map(|r| r.to_vec()).collect();
    match CostMatrix::new(m, rows) {
        Ok(cm) => {
            unsafe { *out = Box::into_raw(Box::new(CsCostMatrix { inner: cm })) };
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}

/// Release a cost matrix handle. Null is a no-op.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_cost_matrix_free(handle: *mut CsCostMatrix) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Number of classes of the matrix.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_cost_matrix_classes(handle: *const CsCostMatrix, out: *mut usize) -> CsStatus {
    if handle.is_null() {
        return fail_null("handle");
    }
    if out.is_null() {
        return fail_null("out");
    }
    unsafe { *out = (*handle).inner.num_classes() };
    CsStatus::CsOk
}

/// Whether misclassifying `label` into some class is deemed costly.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_cost_matrix_is_sensitive(
    handle: *const CsCostMatrix,
    label: usize,
    out: *mut bool,
) -> CsStatus {
    if handle.is_null() {
        return fail_null("handle");
    }
    if out.is_null() {
        return fail_null("out");
    }
    match unsafe { &(*handle).inner }.is_sensitive_label(label) {
        Ok(v) => {
            unsafe { *out = v };
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}

fn prob_vector(probs: *const f64, m: usize) -> Result<ProbVector, Error> {
    let slice = unsafe { std::slice::from_raw_parts(probs, m) };
    ProbVector::new(slice.to_vec())
}

/// Certified radius of the smoothed classifier at a point with smoothed
/// class probabilities `probs` (length `m`) and true label `y`. Negative
/// when the prediction is wrong.
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_standard_radius(
    probs: *const f64,
    m: usize,
    y: usize,
    sigma: f64,
    out: *mut f64,
) -> CsStatus {
    if probs.is_null() {
        return fail_null("probs");
    }
    if out.is_null() {
        return fail_null("out");
    }
    let p = match prob_vector(probs, m) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match radius::standard_radius(&p, y, sigma) {
        Ok(r) => {
            unsafe { *out = r.radius };
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}

/// Cost-sensitive certified radius against the target set of `seed_label`
/// in the cost matrix. `*out_applicable` reports whether the certificate
/// applies (the top class is outside the target set).
#[no_mangle]
///
/// # Safety
/// Pointer arguments must be null or valid for the access implied by
/// their type (array pointers valid for `m` elements, out-pointers
/// writable, handles previously returned by this library and not freed).
pub unsafe extern "C" fn cs_cost_sensitive_radius(
    probs: *const f64,
    m: usize,
    cost: *const CsCostMatrix,
    seed_label: usize,
    sigma: f64,
    out_radius: *mut f64,
    out_applicable: *mut bool,
) -> CsStatus {
    if probs.is_null() {
        return fail_null("probs");
    }
    if cost.is_null() {
        return fail_null("cost");
    }
    if out_radius.is_null() || out_applicable.is_null() {
        return fail_null("out");
    }
    let p = match prob_vector(probs, m) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let omega = match unsafe { &(*cost).inner }.omega(seed_label) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    match radius::cost_sensitive_radius(&p, &omega, sigma) {
        Ok(r) => {
            unsafe {
                *out_radius = r.radius;
                *out_applicable = r.applicable;
            }
            CsStatus::CsOk
        }
        Err(e) => fail(e),
    }
}
