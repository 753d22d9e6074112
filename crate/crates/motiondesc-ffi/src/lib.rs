//! C ABI over the motiondesc experiment drivers.
//!
//! Conventions:
//! - An experiment is an opaque `MdExperiment` handle created from a JSON
//!   config string and released with [`md_experiment_free`].
//! - Every fallible call returns an [`MdStatus`]; on anything but
//!   `MD_STATUS_OK`, [`md_last_error`] returns a message for the calling
//!   thread, valid until that thread's next failing call.
//! - No call unwinds across the boundary: panics are caught and reported
//!   as `MD_STATUS_RUNTIME_ERROR`.

use motiondesc::config::ExperimentConfig;
use motiondesc::experiment::{Experiment, ExperimentError};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status code of every fallible C call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The config failed to parse or validate.
    InvalidConfig = 3,
    /// A required artifact (dataset, checkpoint) is missing; run the
    /// producing step first.
    MissingArtifact = 4,
    /// The operation itself failed at runtime.
    RuntimeError = 5,
}

/// Opaque experiment handle. Not thread-safe: use one handle per thread.
pub struct MdExperiment {
    inner: Experiment,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let stored = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn status_of(err: &ExperimentError) -> MdStatus {
    match err {
        ExperimentError::MissingArtifact { .. } => MdStatus::MissingArtifact,
        e if e.exit_code() == 2 => MdStatus::InvalidConfig,
        _ => MdStatus::RuntimeError,
    }
}

fn fail(status: MdStatus, message: &str) -> MdStatus {
    set_last_error(message);
    status
}

fn fail_with(err: &ExperimentError) -> MdStatus {
    fail(status_of(err), &err.to_string())
}

/// Run a closure, converting panics into `RuntimeError`.
fn guarded<F: FnOnce() -> MdStatus>(f: F) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(MdStatus::RuntimeError, "internal panic"),
    }
}

/// Message describing this thread's most recent failure, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn md_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |msg| msg.as_ptr())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create an experiment from a JSON config string. A null or empty
/// `config_json` uses the built-in defaults. On success writes the new
/// handle to `out` and returns `MD_STATUS_OK`; the handle must be released
/// with [`md_experiment_free`].
///
/// # Safety
/// `config_json` must be null or a valid NUL-terminated string. `out` must
/// be a valid pointer to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn md_experiment_new(
    config_json: *const c_char,
    out: *mut *mut MdExperiment,
) -> MdStatus {
    if out.is_null() {
        return fail(MdStatus::NullArgument, "out pointer is null");
    }
    let text = if config_json.is_null() {
        String::new()
    } else {
        match CStr::from_ptr(config_json).to_str() {
            Ok(s) => s.to_string(),
            Err(_) => return fail(MdStatus::InvalidUtf8, "config_json is not valid UTF-8"),
        }
    };
    guarded(|| {
        let config: ExperimentConfig = if text.trim().is_empty() {
            ExperimentConfig::default()
        } else {
            match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => return fail(MdStatus::InvalidConfig, &format!("config parse: {e}")),
            }
        };
        match Experiment::new(config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MdExperiment { inner }));
                MdStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Release an experiment handle. Null is allowed and does nothing.
///
/// # Safety
/// `exp` must be null or a pointer previously returned by
/// [`md_experiment_new`] that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn md_experiment_free(exp: *mut MdExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

unsafe fn borrow<'a>(exp: *mut MdExperiment) -> Result<&'a MdExperiment, MdStatus> {
    exp.as_ref()
        .ok_or_else(|| fail(MdStatus::NullArgument, "experiment handle is null"))
}

/// Generate the source and target datasets into the configured data
/// directory.
///
/// # Safety
/// `exp` must be a live handle from [`md_experiment_new`].
#[no_mangle]
pub unsafe extern "C" fn md_experiment_generate(exp: *mut MdExperiment) -> MdStatus {
    let handle = match borrow(exp) {
        Ok(h) => h,
        Err(status) => return status,
    };
    guarded(|| match handle.inner.generate() {
        Ok(_) => MdStatus::Ok,
        Err(e) => fail_with(&e),
    })
}

/// Train on the generated source split and write the checkpoint. On success
/// writes the final-epoch training accuracy (percent) to
/// `out_final_train_acc` if it is non-null.
///
/// # Safety
/// `exp` must be a live handle; `out_final_train_acc` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn md_experiment_train(
    exp: *mut MdExperiment,
    out_final_train_acc: *mut f64,
) -> MdStatus {
    let handle = match borrow(exp) {
        Ok(h) => h,
        Err(status) => return status,
    };
    guarded(|| match handle.inner.train() {
        Ok(summary) => {
            if !out_final_train_acc.is_null() {
                *out_final_train_acc = summary.log.last().map_or(0.0, |l| l.train_acc);
            }
            MdStatus::Ok
        }
        Err(e) => fail_with(&e),
    })
}

/// Evaluate the trained checkpoint zero-shot on the target split. On
/// success writes the top-1 accuracy (percent) to `out_accuracy_percent`
/// if it is non-null. Fails with `MD_STATUS_MISSING_ARTIFACT` when no
/// checkpoint exists yet.
///
/// # Safety
/// `exp` must be a live handle; `out_accuracy_percent` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn md_experiment_evaluate(
    exp: *mut MdExperiment,
    masked: bool,
    out_accuracy_percent: *mut f64,
) -> MdStatus {
    let handle = match borrow(exp) {
        Ok(h) => h,
        Err(status) => return status,
    };
    guarded(|| match handle.inner.evaluate(masked) {
        Ok(report) => {
            if !out_accuracy_percent.is_null() {
                *out_accuracy_percent = report.accuracy_percent;
            }
            MdStatus::Ok
        }
        Err(e) => fail_with(&e),
    })
}

/// Check the configured model's analytic gradients against finite
/// differences. On success writes the max relative error to
/// `out_max_rel_err` if non-null; returns `MD_STATUS_RUNTIME_ERROR` when
/// the check exceeds the 1e-5 threshold.
///
/// # Safety
/// `exp` must be a live handle; `out_max_rel_err` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn md_experiment_grad_check(
    exp: *mut MdExperiment,
    out_max_rel_err: *mut f64,
) -> MdStatus {
    let handle = match borrow(exp) {
        Ok(h) => h,
        Err(status) => return status,
    };
    guarded(|| match handle.inner.grad_check_report() {
        Ok(report) => {
            if !out_max_rel_err.is_null() {
                *out_max_rel_err = report.max_rel_err;
            }
            if report.passed() {
                MdStatus::Ok
            } else {
                fail(
                    MdStatus::RuntimeError,
                    &format!(
                        "gradient check failed: {:.3e} exceeds {:.0e}",
                        report.max_rel_err, report.threshold
                    ),
                )
            }
        }
        Err(e) => fail_with(&e),
    })
}
