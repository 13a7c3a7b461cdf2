//! C ABI over `psa-core`.
//!
//! Handles are opaque pointers created by `*_load`/`*_new` and released by
//! the matching `*_free`. Every fallible call returns a [`PsaStatus`]; on
//! failure [`psa_last_error`] describes the cause for the calling thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use libc::{c_char, size_t};
use psa_core::dsp::{preprocess_to, AudioClip, CANONICAL_SAMPLE_RATE};
use psa_core::metrics::{compute_auc, compute_eer, compute_min_tdcf, cumulative_eer, ScoreSet, TDcfParams};
use psa_core::model::{Checkpoint, Network, DECISION_THRESHOLD};
use psa_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Numeric = 5,
    Panic = 6,
}

/// Trained network loaded from a checkpoint.
pub struct PsaNetwork {
    net: Network<f32>,
}

/// Labeled scores for metric computation.
pub struct PsaScoreSet {
    set: ScoreSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PsaStatus {
    match e.exit_code() {
        2 => PsaStatus::Config,
        3 => PsaStatus::Data,
        _ => PsaStatus::Numeric,
    }
}

fn fail(status: PsaStatus, msg: impl Into<String>) -> PsaStatus {
    set_error(msg.into());
    status
}

/// Run `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), PsaStatus>) -> PsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PsaStatus::Panic, "internal panic"),
    }
}

fn core<T>(r: psa_core::Result<T>) -> Result<T, PsaStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), PsaStatus> {
    if p.is_null() {
        Err(fail(PsaStatus::NullArgument, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `data` must point to `len` readable values, or be null with `len == 0`.
unsafe fn slice<'a>(data: *const f64, len: size_t, name: &str) -> Result<&'a [f64], PsaStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(data, name)?;
    Ok(std::slice::from_raw_parts(data, len))
}

/// Message for the last failure on this thread, or null if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn psa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sample rate every waveform passed to this library must have.
#[no_mangle]
pub extern "C" fn psa_sample_rate() -> u32 {
    CANONICAL_SAMPLE_RATE
}

/// Scores above this are bonafide.
#[no_mangle]
pub extern "C" fn psa_decision_threshold() -> f64 {
    DECISION_THRESHOLD
}

/// Load a checkpoint file into a new network handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psa_network_load(path: *const c_char, out: *mut *mut PsaNetwork) -> PsaStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(PsaStatus::InvalidArgument, "path is not UTF-8"))?;
        let ckpt = core(Checkpoint::load(Path::new(p)))?;
        let net = core(ckpt.to_network::<f32>())?;
        *out = Box::into_raw(Box::new(PsaNetwork { net }));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`psa_network_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn psa_network_free(net: *mut PsaNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Samples the network consumes after preprocessing.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn psa_network_input_length(net: *const PsaNetwork) -> size_t {
    if net.is_null() {
        return 0;
    }
    (*net).net.config.input_length
}

/// Score a raw 16 kHz waveform: length standardization, z-score, forward
/// pass. `score` receives P(bonafide) in (0, 1).
///
/// # Safety
/// `samples` must hold `len` values; `net` must be live; `score` writable.
#[no_mangle]
pub unsafe extern "C" fn psa_network_score(
    net: *const PsaNetwork,
    samples: *const f64,
    len: size_t,
    sample_rate: u32,
    score: *mut f64,
) -> PsaStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(score, "score")?;
        let x = slice(samples, len, "samples")?;
        if x.is_empty() {
            return Err(fail(PsaStatus::InvalidArgument, "waveform is empty"));
        }
        if sample_rate != CANONICAL_SAMPLE_RATE {
            return Err(fail(
                PsaStatus::InvalidArgument,
                format!("sample rate {sample_rate} Hz, expected {CANONICAL_SAMPLE_RATE}"),
            ));
        }
        let net = &(*net).net;
        let clip = preprocess_to(&AudioClip::new(x.to_vec(), sample_rate), net.config.input_length);
        *score = core(net.score_utterance(&clip))?.0;
        Ok(())
    })
}

/// Length standardization plus z-score into `out`, which must hold
/// `out_len` values; `out_len` is the target length.
///
/// # Safety
/// `samples` must hold `len` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn psa_preprocess(
    samples: *const f64,
    len: size_t,
    out: *mut f64,
    out_len: size_t,
) -> PsaStatus {
    guard(|| {
        let x = slice(samples, len, "samples")?;
        non_null(out, "out")?;
        if x.is_empty() || out_len == 0 {
            return Err(fail(PsaStatus::InvalidArgument, "input and output must be non-empty"));
        }
        let clip = preprocess_to(&AudioClip::new(x.to_vec(), CANONICAL_SAMPLE_RATE), out_len);
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&clip.samples);
        Ok(())
    })
}

/// Build a score set from bonafide and spoof score arrays.
///
/// # Safety
/// Arrays must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psa_scores_new(
    bonafide: *const f64,
    n_bonafide: size_t,
    spoof: *const f64,
    n_spoof: size_t,
    out: *mut *mut PsaScoreSet,
) -> PsaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let b = slice(bonafide, n_bonafide, "bonafide")?;
        let s = slice(spoof, n_spoof, "spoof")?;
        let set = core(ScoreSet::from_scores(b, s))?;
        *out = Box::into_raw(Box::new(PsaScoreSet { set }));
        Ok(())
    })
}

/// # Safety
/// `set` must come from [`psa_scores_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn psa_scores_free(set: *mut PsaScoreSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Equal error rate and the threshold where it occurs.
///
/// # Safety
/// `set` must be live; `eer` writable; `threshold` writable or null.
#[no_mangle]
pub unsafe extern "C" fn psa_scores_eer(set: *const PsaScoreSet, eer: *mut f64, threshold: *mut f64) -> PsaStatus {
    guard(|| {
        non_null(set, "set")?;
        non_null(eer, "eer")?;
        let (e, t) = core(compute_eer(&(*set).set))?;
        *eer = e;
        if !threshold.is_null() {
            *threshold = t;
        }
        Ok(())
    })
}

/// # Safety
/// `set` must be live; `auc` writable.
#[no_mangle]
pub unsafe extern "C" fn psa_scores_auc(set: *const PsaScoreSet, auc: *mut f64) -> PsaStatus {
    guard(|| {
        non_null(set, "set")?;
        non_null(auc, "auc")?;
        *auc = core(compute_auc(&(*set).set))?;
        Ok(())
    })
}

/// Minimum normalized t-DCF under the default cost model.
///
/// # Safety
/// `set` must be live; `min_tdcf` writable.
#[no_mangle]
pub unsafe extern "C" fn psa_scores_min_tdcf(set: *const PsaScoreSet, min_tdcf: *mut f64) -> PsaStatus {
    guard(|| {
        non_null(set, "set")?;
        non_null(min_tdcf, "min_tdcf")?;
        *min_tdcf = core(compute_min_tdcf(&(*set).set, &TDcfParams::default()))?.0;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn psa_cumulative_eer(eer_la: f64, eer_pa: f64) -> f64 {
    cumulative_eer(eer_la, eer_pa)
}
