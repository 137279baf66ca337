//! C ABI over `mbxnet`.
//!
//! Every fallible function returns an [`MbxStatus`] and writes its result
//! through an out-pointer. On failure, [`mbx_last_error`] describes the most
//! recent error on the calling thread. Handles, byte buffers and strings
//! returned by this library must be released with the matching `*_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mbxnet::sim::{run_experiment, SimConfig};
use mbxnet::value::{assess, prediction_entropy, AssessPolicy, Decision, Polarity, ProbabilityVector};
use mbxnet::{codec, Annotation, InfoPayload, Mailbox};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    PermissionDenied = 3,
    Codec = 4,
    Integrity = 5,
    Config = 6,
    Runtime = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbxPolarity {
    TransmitLowEntropy = 0,
    TransmitHighEntropy = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbxDecision {
    Transmit = 0,
    Discard = 1,
}

/// Opaque mailbox handle.
pub struct MbxMailbox(Mailbox);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MbxStatus, msg: impl Into<String>) -> MbxStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`MbxStatus::Panic`].
fn guard(f: impl FnOnce() -> MbxStatus) -> MbxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MbxStatus::Panic, "internal panic"),
    }
}

fn into_handle(m: Mailbox) -> *mut MbxMailbox {
    Box::into_raw(Box::new(MbxMailbox(m)))
}

unsafe fn probs(ptr: *const f64, n: usize) -> Result<ProbabilityVector, MbxStatus> {
    if ptr.is_null() {
        return Err(fail(MbxStatus::NullPointer, "probability pointer is null"));
    }
    let slice = std::slice::from_raw_parts(ptr, n);
    ProbabilityVector::new(slice.to_vec()).map_err(|e| fail(MbxStatus::InvalidArgument, e.to_string()))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mbx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a mailbox. A NULL `payload` means an absent payload and requires
/// `len == 0`.
///
/// # Safety
/// `payload` must be NULL or point to `len` readable bytes; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_new(
    payload: *const u8,
    len: usize,
    intrinsic_value: f64,
    created_at: u64,
    out: *mut *mut MbxMailbox,
) -> MbxStatus {
    guard(|| {
        if out.is_null() {
            return fail(MbxStatus::NullPointer, "out is null");
        }
        if !intrinsic_value.is_finite() {
            return fail(MbxStatus::InvalidArgument, "intrinsic value must be finite");
        }
        let body = if payload.is_null() {
            if len != 0 {
                return fail(MbxStatus::NullPointer, "payload is null but len is non-zero");
            }
            InfoPayload::absent()
        } else {
            InfoPayload::from_bytes(std::slice::from_raw_parts(payload, len).to_vec())
        };
        *out = into_handle(Mailbox::new(body, intrinsic_value, created_at));
        MbxStatus::Ok
    })
}

/// Appends an annotation, returning a new handle; `m` is left unchanged.
///
/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_annotate(
    m: *const MbxMailbox,
    node_id: u32,
    time: u64,
    value_delta: f64,
    size_delta: i64,
    permitted: bool,
    out: *mut *mut MbxMailbox,
) -> MbxStatus {
    guard(|| {
        if m.is_null() || out.is_null() {
            return fail(MbxStatus::NullPointer, "mailbox or out is null");
        }
        let a = match Annotation::try_new(node_id, time, value_delta, size_delta, permitted) {
            Ok(a) => a,
            Err(e) => return fail(MbxStatus::InvalidArgument, e.to_string()),
        };
        match (*m).0.annotate(a) {
            Ok(next) => {
                *out = into_handle(next);
                MbxStatus::Ok
            }
            Err(e) => fail(MbxStatus::PermissionDenied, e.to_string()),
        }
    })
}

/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_value(m: *const MbxMailbox, out: *mut f64) -> MbxStatus {
    if m.is_null() || out.is_null() {
        return fail(MbxStatus::NullPointer, "mailbox or out is null");
    }
    *out = (*m).0.current_value();
    MbxStatus::Ok
}

/// Current size in bits.
///
/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_size(m: *const MbxMailbox, out: *mut u64) -> MbxStatus {
    if m.is_null() || out.is_null() {
        return fail(MbxStatus::NullPointer, "mailbox or out is null");
    }
    *out = (*m).0.current_size();
    MbxStatus::Ok
}

/// Ticks elapsed between creation and `t`.
///
/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_age(m: *const MbxMailbox, t: u64, out: *mut u64) -> MbxStatus {
    if m.is_null() || out.is_null() {
        return fail(MbxStatus::NullPointer, "mailbox or out is null");
    }
    match (*m).0.lifecycle_age(t) {
        Ok(age) => {
            *out = age;
            MbxStatus::Ok
        }
        Err(e) => fail(MbxStatus::InvalidArgument, e.to_string()),
    }
}

/// Number of annotations, or 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_annotation_count(m: *const MbxMailbox) -> usize {
    if m.is_null() {
        return 0;
    }
    (*m).0.annotations().len()
}

/// `Ok` if the stored digest matches the payload, `Integrity` otherwise.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_verify(m: *const MbxMailbox) -> MbxStatus {
    if m.is_null() {
        return fail(MbxStatus::NullPointer, "mailbox is null");
    }
    if codec::verify_integrity(&(*m).0) {
        MbxStatus::Ok
    } else {
        fail(MbxStatus::Integrity, "payload digest mismatch")
    }
}

/// Serializes to the wire format. Release the buffer with [`mbx_bytes_free`].
///
/// # Safety
/// `m` must be a live handle; `out` and `out_len` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_encode(m: *const MbxMailbox, out: *mut *mut u8, out_len: *mut usize) -> MbxStatus {
    guard(|| {
        if m.is_null() || out.is_null() || out_len.is_null() {
            return fail(MbxStatus::NullPointer, "mailbox, out or out_len is null");
        }
        match codec::encode(&(*m).0) {
            Ok(bytes) => {
                let boxed = bytes.into_boxed_slice();
                *out_len = boxed.len();
                *out = Box::into_raw(boxed) as *mut u8;
                MbxStatus::Ok
            }
            Err(e) => fail(MbxStatus::Codec, e.to_string()),
        }
    })
}

/// Parses the wire format and checks the digest.
///
/// # Safety
/// `bytes` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_decode(bytes: *const u8, len: usize, out: *mut *mut MbxMailbox) -> MbxStatus {
    guard(|| {
        if bytes.is_null() || out.is_null() {
            return fail(MbxStatus::NullPointer, "bytes or out is null");
        }
        match codec::decode(std::slice::from_raw_parts(bytes, len)) {
            Ok(m) => {
                *out = into_handle(m);
                MbxStatus::Ok
            }
            Err(codec::CodecError::Integrity) => fail(MbxStatus::Integrity, "payload digest mismatch"),
            Err(e) => fail(MbxStatus::Codec, e.to_string()),
        }
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mbx_mailbox_free(m: *mut MbxMailbox) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `ptr`/`len` must come from [`mbx_mailbox_encode`] and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn mbx_bytes_free(ptr: *mut u8, len: usize) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(ptr, len)));
    }
}

/// Shannon entropy in bits of a probability vector of length `n`.
///
/// # Safety
/// `p` must point to `n` readable doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mbx_prediction_entropy(p: *const f64, n: usize, out: *mut f64) -> MbxStatus {
    if out.is_null() {
        return fail(MbxStatus::NullPointer, "out is null");
    }
    match probs(p, n) {
        Ok(pv) => {
            *out = prediction_entropy(&pv);
            MbxStatus::Ok
        }
        Err(s) => s,
    }
}

/// Applies the threshold rule; writes the decision and the entropy.
///
/// # Safety
/// `p` must point to `n` readable doubles; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mbx_assess(
    p: *const f64,
    n: usize,
    threshold: f64,
    polarity: MbxPolarity,
    out_decision: *mut MbxDecision,
    out_entropy: *mut f64,
) -> MbxStatus {
    if out_decision.is_null() || out_entropy.is_null() {
        return fail(MbxStatus::NullPointer, "out pointer is null");
    }
    let pv = match probs(p, n) {
        Ok(pv) => pv,
        Err(s) => return s,
    };
    let polarity = match polarity {
        MbxPolarity::TransmitLowEntropy => Polarity::TransmitLowEntropy,
        MbxPolarity::TransmitHighEntropy => Polarity::TransmitHighEntropy,
    };
    let policy = match AssessPolicy::new(threshold, polarity) {
        Ok(p) => p,
        Err(e) => return fail(MbxStatus::InvalidArgument, e.to_string()),
    };
    let a = assess(&pv, &policy);
    *out_decision = match a.decision {
        Decision::Transmit => MbxDecision::Transmit,
        Decision::Discard => MbxDecision::Discard,
    };
    *out_entropy = a.entropy;
    MbxStatus::Ok
}

/// Runs one experiment from a JSON config and returns the metrics report
/// (`records` and `summary`) as JSON. Release it with [`mbx_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbx_run_experiment_json(config_json: *const c_char, out: *mut *mut c_char) -> MbxStatus {
    guard(|| {
        if config_json.is_null() || out.is_null() {
            return fail(MbxStatus::NullPointer, "config or out is null");
        }
        let text = match CStr::from_ptr(config_json).to_str() {
            Ok(t) => t,
            Err(_) => return fail(MbxStatus::Config, "config is not UTF-8"),
        };
        let cfg: SimConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(MbxStatus::Config, e.to_string()),
        };
        if let Err(e) = cfg.validate() {
            return fail(MbxStatus::Config, e.to_string());
        }
        match run_experiment(&cfg) {
            Ok(report) => {
                let json = serde_json::to_string(&report).expect("report serializes");
                *out = CString::new(json).expect("json has no nul").into_raw();
                MbxStatus::Ok
            }
            Err(e) => fail(MbxStatus::Runtime, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mbx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
