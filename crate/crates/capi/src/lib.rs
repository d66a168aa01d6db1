//! C ABI for the repetitive scenario trial toolkit.
//!
//! Conventions: every function returns an integer status code
//! ([`RS_OK`] on success) and writes results through out-pointers.
//! Trial designs are held behind an opaque handle created from a JSON
//! spec; strings returned by the library must be released with
//! [`rs_string_free`] and handles with [`rs_design_free`].

use repscen::bounds::{levelq_confidence, psi_campi, selection_prob_exact};
use repscen::design::{design, DesignDocument, DesignSpec, TrialDesign};
use repscen::specfun::{binom_cdf, binom_cdf_inv_eps};
use repscen::Error;
use std::ffi::{c_char, CStr, CString};

/// Success.
pub const RS_OK: i32 = 0;
/// Invalid argument values (domain errors, infeasible designs).
pub const RS_ERR_DOMAIN: i32 = 1;
/// Malformed input: null pointer, bad UTF-8, or invalid JSON.
pub const RS_ERR_INPUT: i32 = 2;
/// Numerical failure inside the library.
pub const RS_ERR_NUMERICAL: i32 = 3;

/// Opaque trial-design handle.
pub struct RsDesign {
    document: DesignDocument,
}

fn status_of(e: &Error) -> i32 {
    match e {
        Error::Domain(_)
        | Error::InfeasibleDesign(_)
        | Error::ResourceLimit(_)
        | Error::DegenerateInput(_) => RS_ERR_DOMAIN,
        Error::Config(_) | Error::Io(_) | Error::Json(_) => RS_ERR_INPUT,
        Error::Numerical(_) | Error::Nonconvergence { .. } => RS_ERR_NUMERICAL,
        Error::Trial { source, .. } => status_of(source),
    }
}

fn write_scalar(out: *mut f64, value: repscen::Result<f64>) -> i32 {
    if out.is_null() {
        return RS_ERR_INPUT;
    }
    match value {
        Ok(v) => {
            unsafe { *out = v };
            RS_OK
        }
        Err(e) => status_of(&e),
    }
}

/// Binomial distribution function: probability of `n` or fewer successes
/// in `big_n` trials of success probability `p`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn rs_binom_cdf(n: i64, big_n: u64, p: f64, out: *mut f64) -> i32 {
    write_scalar(out, binom_cdf(n, big_n, p))
}

/// Solves `binom_cdf(n, big_n, 1 - eps) = target` for `eps`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn rs_binom_cdf_inv_eps(
    n: i64,
    big_n: u64,
    target: f64,
    out: *mut f64,
) -> i32 {
    write_scalar(out, binom_cdf_inv_eps(n, big_n, target))
}

/// Level-q confidence quantity `Phi(q - zeta; m, 1 - eps)`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn rs_levelq_confidence(
    q: u64,
    m: u64,
    zeta: u64,
    eps: f64,
    out: *mut f64,
) -> i32 {
    write_scalar(out, levelq_confidence(q, m, zeta, eps))
}

/// Comparison bound for optimal-discarding strategies, clamped to [0, 1].
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn rs_psi_campi(
    q: u64,
    zeta_high: u64,
    m: u64,
    eps: f64,
    out: *mut f64,
) -> i32 {
    write_scalar(out, psi_campi(q, zeta_high, m, eps))
}

/// Exact probability that the unviolated count lands on `q` when solving
/// on `r` of `m` samples with support dimension `k`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn rs_selection_prob_exact(
    r: u64,
    q: u64,
    m: u64,
    k: u64,
    out: *mut f64,
) -> i32 {
    write_scalar(out, selection_prob_exact(r, q, m, k))
}

/// Builds a trial design from a JSON design spec; on success stores an
/// owned handle in `*out`.
///
/// # Safety
/// `spec_json` must be a valid NUL-terminated string; `out` must be a
/// valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn rs_design_new(spec_json: *const c_char, out: *mut *mut RsDesign) -> i32 {
    if spec_json.is_null() || out.is_null() {
        return RS_ERR_INPUT;
    }
    let Ok(text) = CStr::from_ptr(spec_json).to_str() else {
        return RS_ERR_INPUT;
    };
    let spec: DesignSpec = match serde_json::from_str(text) {
        Ok(s) => s,
        Err(_) => return RS_ERR_INPUT,
    };
    match design(&spec) {
        Ok(d) => {
            let handle = Box::new(RsDesign {
                document: DesignDocument { design: d, spec },
            });
            *out = Box::into_raw(handle);
            RS_OK
        }
        Err(e) => status_of(&e),
    }
}

fn design_ref<'a>(handle: *const RsDesign) -> Option<&'a TrialDesign> {
    unsafe { handle.as_ref().map(|h| &h.document.design) }
}

/// Number of samples each trial solves on.
///
/// # Safety
/// `handle` must be a live handle from `rs_design_new`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rs_design_r_star(handle: *const RsDesign, out: *mut u64) -> i32 {
    match (design_ref(handle), out.is_null()) {
        (Some(d), false) => {
            *out = d.r_star;
            RS_OK
        }
        _ => RS_ERR_INPUT,
    }
}

/// Number of independent trials to run.
///
/// # Safety
/// `handle` must be a live handle from `rs_design_new`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rs_design_n_trials(handle: *const RsDesign, out: *mut u64) -> i32 {
    match (design_ref(handle), out.is_null()) {
        (Some(d), false) => {
            *out = d.n_trials;
            RS_OK
        }
        _ => RS_ERR_INPUT,
    }
}

/// Target band for the unviolated count.
///
/// # Safety
/// `handle` must be a live handle from `rs_design_new`; both out
/// pointers valid.
#[no_mangle]
pub unsafe extern "C" fn rs_design_band(
    handle: *const RsDesign,
    q_low: *mut u64,
    q_high: *mut u64,
) -> i32 {
    match (design_ref(handle), q_low.is_null() || q_high.is_null()) {
        (Some(d), false) => {
            *q_low = d.q_low;
            *q_high = d.q_high;
            RS_OK
        }
        _ => RS_ERR_INPUT,
    }
}

/// Per-trial probability that the count lands in the band.
///
/// # Safety
/// `handle` must be a live handle from `rs_design_new`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rs_design_p_trial(handle: *const RsDesign, out: *mut f64) -> i32 {
    match (design_ref(handle), out.is_null()) {
        (Some(d), false) => {
            *out = d.p_trial;
            RS_OK
        }
        _ => RS_ERR_INPUT,
    }
}

/// Serializes the design (with its spec) to a JSON string owned by the
/// caller; release with `rs_string_free`.
///
/// # Safety
/// `handle` must be a live handle from `rs_design_new`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rs_design_to_json(handle: *const RsDesign, out: *mut *mut c_char) -> i32 {
    if out.is_null() {
        return RS_ERR_INPUT;
    }
    let Some(h) = handle.as_ref() else {
        return RS_ERR_INPUT;
    };
    match serde_json::to_string(&h.document) {
        Ok(text) => match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                RS_OK
            }
            Err(_) => RS_ERR_NUMERICAL,
        },
        Err(_) => RS_ERR_NUMERICAL,
    }
}

/// Releases a design handle. Null is a no-op.
///
/// # Safety
/// `handle` must be null or a handle from `rs_design_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_design_free(handle: *mut RsDesign) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
