//! C interface to the problem executor and field renderer.
//!
//! Conventions: every fallible function returns an [`MaStatus`]; on failure
//! [`ma_last_error`] describes the problem for the calling thread. Strings
//! returned as `char *` are owned by the caller and must be released with
//! [`ma_string_free`]. Handles are released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mechagents::dsl::{execute_problem, parse_problem, validate, ExecutionOutcome, OutcomeStatus, ProblemSpec};
use mechagents::fem::render_png;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Io = 5,
    NotFound = 6,
    Panic = 7,
}

/// Outcome category of an execution.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaOutcomeStatus {
    Success = 0,
    ValidationError = 1,
    SolverError = 2,
}

/// Parsed problem document.
pub struct MaProblem {
    spec: ProblemSpec,
}

/// Result of executing a problem.
pub struct MaOutcome {
    outcome: ExecutionOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: MaStatus, msg: impl Into<String>) -> MaStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into `MaStatus::Panic`.
fn guard(f: impl FnOnce() -> MaStatus) -> MaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == MaStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(MaStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MaStatus> {
    if p.is_null() {
        return Err(fail(MaStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(MaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn owned_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ma_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ma_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a problem document (JSON). On success `*out` holds a new handle.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_problem_parse(json: *const c_char, out: *mut *mut MaProblem) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return fail(MaStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_problem(text) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(MaProblem { spec }));
                MaStatus::Ok
            }
            Err(e) => fail(MaStatus::Parse, format!("{}: {}", e.kind.code(), e)),
        }
    })
}

/// Checks the document without solving. On `Validation` the last error
/// lists one `CODE: subject` line per violation.
///
/// # Safety
/// `problem` must be a live handle from [`ma_problem_parse`].
#[no_mangle]
pub unsafe extern "C" fn ma_problem_validate(problem: *const MaProblem) -> MaStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else { return fail(MaStatus::NullArgument, "problem is null") };
        let report = validate(&p.spec);
        if report.is_valid() {
            return MaStatus::Ok;
        }
        let lines: Vec<String> = report.violations.iter().map(|v| format!("{}: {}", v.code.as_str(), v.subject)).collect();
        fail(MaStatus::Validation, lines.join("\n"))
    })
}

/// # Safety
/// `problem` must be null or a handle from [`ma_problem_parse`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ma_problem_free(problem: *mut MaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Executes the problem, writing artifacts under `workdir`. Returns `Ok`
/// whenever an outcome was produced, including validation and solver
/// failures; inspect it with [`ma_outcome_status`].
///
/// # Safety
/// `problem` must be a live handle, `workdir` a nul-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_execute(problem: *const MaProblem, workdir: *const c_char, out: *mut *mut MaOutcome) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return fail(MaStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(p) = problem.as_ref() else { return fail(MaStatus::NullArgument, "problem is null") };
        let dir = match str_arg(workdir, "workdir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        let outcome = execute_problem(&p.spec, Path::new(dir));
        *out = Box::into_raw(Box::new(MaOutcome { outcome }));
        MaStatus::Ok
    })
}

/// # Safety
/// `outcome` must be a live handle from [`ma_execute`].
#[no_mangle]
pub unsafe extern "C" fn ma_outcome_status(outcome: *const MaOutcome) -> MaOutcomeStatus {
    match outcome.as_ref().map(|o| o.outcome.status) {
        Some(OutcomeStatus::Success) => MaOutcomeStatus::Success,
        Some(OutcomeStatus::ValidationError) => MaOutcomeStatus::ValidationError,
        Some(OutcomeStatus::SolverError) | None => MaOutcomeStatus::SolverError,
    }
}

/// Looks up a named scalar such as `traction_force_x`.
///
/// # Safety
/// `outcome` must be a live handle, `name` a nul-terminated string and
/// `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_outcome_scalar(outcome: *const MaOutcome, name: *const c_char, value: *mut f64) -> MaStatus {
    guard(|| {
        let Some(o) = outcome.as_ref() else { return fail(MaStatus::NullArgument, "outcome is null") };
        if value.is_null() {
            return fail(MaStatus::NullArgument, "value is null");
        }
        let name = match str_arg(name, "name") {
            Ok(n) => n,
            Err(s) => return s,
        };
        match o.outcome.scalars.get(name) {
            Some(v) => {
                *value = *v;
                MaStatus::Ok
            }
            None => fail(MaStatus::NotFound, format!("no scalar named `{name}`")),
        }
    })
}

/// Human-readable outcome, as shown to agents. Free with [`ma_string_free`].
///
/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_outcome_text(outcome: *const MaOutcome) -> *mut c_char {
    match outcome.as_ref() {
        Some(o) => owned_string(&o.outcome.render()),
        None => ptr::null_mut(),
    }
}

/// The outcome as JSON. Free with [`ma_string_free`].
///
/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_outcome_json(outcome: *const MaOutcome) -> *mut c_char {
    match outcome.as_ref() {
        Some(o) => owned_string(&serde_json::to_string(&o.outcome).expect("outcomes serialize")),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_outcome_artifact_count(outcome: *const MaOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.outcome.artifacts.len())
}

/// PNG path (relative to the work directory) of artifact `index`, or null
/// when out of range. Free with [`ma_string_free`].
///
/// # Safety
/// `outcome` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_outcome_artifact_path(outcome: *const MaOutcome, index: usize) -> *mut c_char {
    match outcome.as_ref().and_then(|o| o.outcome.artifacts.get(index)) {
        Some(a) => owned_string(&a.path),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `outcome` must be null or a handle from [`ma_execute`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ma_outcome_free(outcome: *mut MaOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Renders a field file to PNG and reports the plotted range.
///
/// # Safety
/// Paths must be nul-terminated strings; `min` and `max` may be null.
#[no_mangle]
pub unsafe extern "C" fn ma_render_png(field_path: *const c_char, png_path: *const c_char, min: *mut f64, max: *mut f64) -> MaStatus {
    guard(|| {
        let (field, png) = match (str_arg(field_path, "field_path"), str_arg(png_path, "png_path")) {
            (Ok(f), Ok(p)) => (f, p),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match render_png(Path::new(field), Path::new(png)) {
            Ok(d) => {
                if !min.is_null() {
                    *min = d.min;
                }
                if !max.is_null() {
                    *max = d.max;
                }
                MaStatus::Ok
            }
            Err(e) => fail(MaStatus::Io, e.to_string()),
        }
    })
}
