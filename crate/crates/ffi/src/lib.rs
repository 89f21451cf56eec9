//! C ABI for the cyborgnav toolkit.
//!
//! The interface follows a small set of conventions:
//!
//! - Handles (`CnConfig`, `CnTrial`, `CnSession`) are opaque pointers created
//!   and destroyed by this library; never free them with `free()`.
//! - Every fallible call returns a [`CnStatus`] and writes its result through
//!   an out-pointer. `CN_OK` is zero, so `if (cn_...(...))` reads as "if it
//!   failed".
//! - On failure a thread-local message describes the error;
//!   [`cn_last_error`] copies it out.
//! - Pointer arguments must be valid for the duration of the call; string
//!   arguments are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cyborgnav::config::ConfigDocument;
use cyborgnav::controller::Channel;
use cyborgnav::geometry::PathSpec;
use cyborgnav::log::write_record_to_path;
use cyborgnav::metrics::{control_effort, navigation_time, tracking_error};
use cyborgnav::trial::{
    run_session, run_trial, Direction, ExclusionReason, TerminationReason, TrialConfig, TrialRecord,
};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Result code returned by every fallible function in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnStatus {
    /// The call succeeded.
    CnOk = 0,
    /// A required pointer argument was NULL.
    CnNullArgument = 1,
    /// A string argument was not valid UTF-8.
    CnInvalidUtf8 = 2,
    /// The configuration failed validation.
    CnInvalidConfig = 3,
    /// The simulation could not run to completion.
    CnRunFailed = 4,
    /// A file could not be read or written.
    CnIoError = 5,
    /// The requested metric is undefined for this trial (e.g. tracking
    /// error of a failed trial).
    CnUndefinedMetric = 6,
    /// An index argument was out of range.
    CnIndexOutOfRange = 7,
}

/// Terminal outcome of a trial.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnOutcome {
    /// The agent reached the destination circle.
    CnOutcomeSuccess = 0,
    /// The time limit elapsed first.
    CnOutcomeTimeout = 1,
    /// The agent left the arena.
    CnOutcomeOutOfBounds = 2,
}

/// Why a trial was flagged for exclusion from analysis.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnExclusion {
    /// The trial is clean.
    CnExclusionNone = 0,
    /// Fifteen or more consecutive same-side antenna stimuli.
    CnExclusionUnilateral = 1,
    /// More than a fifth of the frames lost tracking.
    CnExclusionMissTracking = 2,
}

/// Stimulation channel of a command.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnChannel {
    CnChannelLeftAntenna = 0,
    CnChannelRightAntenna = 1,
    CnChannelElytraBoth = 2,
}

/// One tracked pose sample.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CnFrame {
    pub t_s: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub heading_deg: f64,
    /// 1 when the pose was tracked, 0 when it carries the last known pose.
    pub tracked: u8,
}

/// One stimulus command as delivered.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CnStimulus {
    pub t_s: f64,
    pub channel: CnChannel,
    pub frequency_hz: f64,
    pub duration_ms: f64,
}

/// Opaque trial configuration handle.
pub struct CnConfig {
    inner: TrialConfig,
}

/// Opaque finished-trial handle.
pub struct CnTrial {
    record: TrialRecord,
    path: PathSpec,
}

/// Opaque session handle: an ordered list of trials by one animal.
pub struct CnSession {
    records: Vec<TrialRecord>,
    path: PathSpec,
}

/// Version of this library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the current thread's last error message into `buf` (at most
/// `cap - 1` bytes plus a NUL terminator). Returns the full message length
/// in bytes, whether or not it fit. `buf` may be NULL when `cap` is 0.
#[no_mangle]
pub extern "C" fn cn_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Allocate a configuration with the built-in defaults.
#[no_mangle]
pub extern "C" fn cn_config_default() -> *mut CnConfig {
    Box::into_raw(Box::new(CnConfig {
        inner: TrialConfig::default(),
    }))
}

/// Parse a configuration from a JSON document (the same schema the CLI
/// accepts). On success writes a new handle to `out`.
///
/// # Safety
/// `json` must point to a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cn_config_from_json(
    json: *const c_char,
    out: *mut *mut CnConfig,
) -> CnStatus {
    if json.is_null() || out.is_null() {
        set_error("cn_config_from_json: NULL argument");
        return CnStatus::CnNullArgument;
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("cn_config_from_json: json is not valid UTF-8");
            return CnStatus::CnInvalidUtf8;
        }
    };
    match ConfigDocument::from_json(text) {
        Ok(doc) => {
            *out = Box::into_raw(Box::new(CnConfig {
                inner: doc.to_trial_config(),
            }));
            CnStatus::CnOk
        }
        Err(e) => {
            set_error(e.to_string());
            *out = ptr::null_mut();
            CnStatus::CnInvalidConfig
        }
    }
}

/// Free a configuration handle. NULL is accepted and ignored.
///
/// # Safety
/// `cfg` must be NULL or a pointer from a `cn_config_*` constructor, and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cn_config_free(cfg: *mut CnConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn config_mut<'a>(cfg: *mut CnConfig, who: &str) -> Result<&'a mut CnConfig, CnStatus> {
    if cfg.is_null() {
        set_error(format!("{who}: NULL configuration"));
        return Err(CnStatus::CnNullArgument);
    }
    Ok(&mut *cfg)
}

/// Set the master seed.
///
/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn cn_config_set_seed(cfg: *mut CnConfig, seed: u64) -> CnStatus {
    match config_mut(cfg, "cn_config_set_seed") {
        Ok(c) => {
            c.inner.seed = seed;
            CnStatus::CnOk
        }
        Err(s) => s,
    }
}

/// Set the proportional gain and update interval.
///
/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn cn_config_set_controller(
    cfg: *mut CnConfig,
    kp: f64,
    t_update_s: f64,
) -> CnStatus {
    let c = match config_mut(cfg, "cn_config_set_controller") {
        Ok(c) => c,
        Err(s) => return s,
    };
    let mut candidate = c.inner.clone();
    candidate.controller.kp = kp;
    candidate.controller.t_update_s = t_update_s;
    match candidate.validate() {
        Ok(()) => {
            c.inner = candidate;
            CnStatus::CnOk
        }
        Err(e) => {
            set_error(e.to_string());
            CnStatus::CnInvalidConfig
        }
    }
}

/// Run the lane in reverse (destination to origin) when `reversed` is
/// nonzero.
///
/// # Safety
/// `cfg` must be a valid configuration handle.
#[no_mangle]
pub unsafe extern "C" fn cn_config_set_reversed(cfg: *mut CnConfig, reversed: u8) -> CnStatus {
    match config_mut(cfg, "cn_config_set_reversed") {
        Ok(c) => {
            c.inner.direction = if reversed != 0 {
                Direction::Reversed
            } else {
                Direction::Forward
            };
            CnStatus::CnOk
        }
        Err(s) => s,
    }
}

fn trial_handle(record: TrialRecord, path: &PathSpec) -> *mut CnTrial {
    Box::into_raw(Box::new(CnTrial {
        record,
        path: path.clone(),
    }))
}

/// Run one trial under `cfg`. On success writes a new trial handle to
/// `out`.
///
/// # Safety
/// `cfg` must be a valid configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_run(cfg: *const CnConfig, out: *mut *mut CnTrial) -> CnStatus {
    if cfg.is_null() || out.is_null() {
        set_error("cn_trial_run: NULL argument");
        return CnStatus::CnNullArgument;
    }
    let config = &(*cfg).inner;
    let result = catch_unwind(AssertUnwindSafe(|| run_trial(config)));
    match result {
        Ok(Ok(record)) => {
            *out = trial_handle(record, &config.path);
            CnStatus::CnOk
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            *out = ptr::null_mut();
            CnStatus::CnInvalidConfig
        }
        Err(_) => {
            set_error("cn_trial_run: internal panic");
            *out = ptr::null_mut();
            CnStatus::CnRunFailed
        }
    }
}

/// Run a session of `n_trials` trials under `cfg`, alternating direction
/// and carrying habituation across trials. On success writes a new session
/// handle to `out`.
///
/// # Safety
/// `cfg` must be a valid configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_session_run(
    cfg: *const CnConfig,
    n_trials: u32,
    out: *mut *mut CnSession,
) -> CnStatus {
    if cfg.is_null() || out.is_null() {
        set_error("cn_session_run: NULL argument");
        return CnStatus::CnNullArgument;
    }
    let config = &(*cfg).inner;
    let result = catch_unwind(AssertUnwindSafe(|| run_session(config, n_trials)));
    match result {
        Ok(Ok(records)) => {
            *out = Box::into_raw(Box::new(CnSession {
                records,
                path: config.path.clone(),
            }));
            CnStatus::CnOk
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            *out = ptr::null_mut();
            CnStatus::CnInvalidConfig
        }
        Err(_) => {
            set_error("cn_session_run: internal panic");
            *out = ptr::null_mut();
            CnStatus::CnRunFailed
        }
    }
}

/// Free a session handle. NULL is accepted and ignored.
///
/// # Safety
/// `session` must be NULL or a pointer from [`cn_session_run`], and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cn_session_free(session: *mut CnSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Number of trials in a session; 0 for NULL.
///
/// # Safety
/// `session` must be NULL or a valid session handle.
#[no_mangle]
pub unsafe extern "C" fn cn_session_len(session: *const CnSession) -> usize {
    if session.is_null() {
        return 0;
    }
    (*session).records.len()
}

/// Clone trial `index` of a session into an independent trial handle.
///
/// # Safety
/// `session` must be a valid session handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_session_trial(
    session: *const CnSession,
    index: usize,
    out: *mut *mut CnTrial,
) -> CnStatus {
    if session.is_null() || out.is_null() {
        set_error("cn_session_trial: NULL argument");
        return CnStatus::CnNullArgument;
    }
    let s = &*session;
    match s.records.get(index) {
        Some(record) => {
            *out = trial_handle(record.clone(), &s.path);
            CnStatus::CnOk
        }
        None => {
            set_error(format!(
                "cn_session_trial: index {index} out of range for {} trials",
                s.records.len()
            ));
            *out = ptr::null_mut();
            CnStatus::CnIndexOutOfRange
        }
    }
}

/// Free a trial handle. NULL is accepted and ignored.
///
/// # Safety
/// `trial` must be NULL or a trial handle from this library, and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_free(trial: *mut CnTrial) {
    if !trial.is_null() {
        drop(Box::from_raw(trial));
    }
}

unsafe fn trial_ref<'a>(trial: *const CnTrial, who: &str) -> Result<&'a CnTrial, CnStatus> {
    if trial.is_null() {
        set_error(format!("{who}: NULL trial"));
        return Err(CnStatus::CnNullArgument);
    }
    Ok(&*trial)
}

/// Terminal outcome of the trial.
///
/// # Safety
/// `trial` must be a valid trial handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_outcome(trial: *const CnTrial, out: *mut CnOutcome) -> CnStatus {
    if out.is_null() {
        set_error("cn_trial_outcome: NULL out pointer");
        return CnStatus::CnNullArgument;
    }
    match trial_ref(trial, "cn_trial_outcome") {
        Ok(t) => {
            *out = match t.record.outcome {
                TerminationReason::Success => CnOutcome::CnOutcomeSuccess,
                TerminationReason::Timeout => CnOutcome::CnOutcomeTimeout,
                TerminationReason::OutOfBounds => CnOutcome::CnOutcomeOutOfBounds,
            };
            CnStatus::CnOk
        }
        Err(s) => s,
    }
}

/// Exclusion flag of the trial.
///
/// # Safety
/// `trial` must be a valid trial handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_exclusion(
    trial: *const CnTrial,
    out: *mut CnExclusion,
) -> CnStatus {
    if out.is_null() {
        set_error("cn_trial_exclusion: NULL out pointer");
        return CnStatus::CnNullArgument;
    }
    match trial_ref(trial, "cn_trial_exclusion") {
        Ok(t) => {
            *out = match t.record.excluded {
                None => CnExclusion::CnExclusionNone,
                Some(ExclusionReason::UnilateralRuns) => CnExclusion::CnExclusionUnilateral,
                Some(ExclusionReason::MissTracking) => CnExclusion::CnExclusionMissTracking,
            };
            CnStatus::CnOk
        }
        Err(s) => s,
    }
}

/// Number of pose frames in the trial; 0 for NULL.
///
/// # Safety
/// `trial` must be NULL or a valid trial handle.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_frame_count(trial: *const CnTrial) -> usize {
    if trial.is_null() {
        return 0;
    }
    (*trial).record.frames.len()
}

/// Copy pose frame `index` into `out`.
///
/// # Safety
/// `trial` must be a valid trial handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_frame(
    trial: *const CnTrial,
    index: usize,
    out: *mut CnFrame,
) -> CnStatus {
    if out.is_null() {
        set_error("cn_trial_frame: NULL out pointer");
        return CnStatus::CnNullArgument;
    }
    let t = match trial_ref(trial, "cn_trial_frame") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match t.record.frames.get(index) {
        Some(f) => {
            *out = CnFrame {
                t_s: f.t_s,
                x_mm: f.pose.x,
                y_mm: f.pose.y,
                heading_deg: f.pose.heading_deg,
                tracked: u8::from(f.tracked),
            };
            CnStatus::CnOk
        }
        None => {
            set_error(format!(
                "cn_trial_frame: index {index} out of range for {} frames",
                t.record.frames.len()
            ));
            CnStatus::CnIndexOutOfRange
        }
    }
}

/// Number of stimuli delivered in the trial; 0 for NULL.
///
/// # Safety
/// `trial` must be NULL or a valid trial handle.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_stimulus_count(trial: *const CnTrial) -> usize {
    if trial.is_null() {
        return 0;
    }
    (*trial).record.stimuli.len()
}

/// Copy stimulus `index` into `out`.
///
/// # Safety
/// `trial` must be a valid trial handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_stimulus(
    trial: *const CnTrial,
    index: usize,
    out: *mut CnStimulus,
) -> CnStatus {
    if out.is_null() {
        set_error("cn_trial_stimulus: NULL out pointer");
        return CnStatus::CnNullArgument;
    }
    let t = match trial_ref(trial, "cn_trial_stimulus") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match t.record.stimuli.get(index) {
        Some(s) => {
            *out = CnStimulus {
                t_s: s.timestamp_s,
                channel: match s.channel {
                    Channel::LeftAntenna => CnChannel::CnChannelLeftAntenna,
                    Channel::RightAntenna => CnChannel::CnChannelRightAntenna,
                    Channel::ElytraBoth => CnChannel::CnChannelElytraBoth,
                },
                frequency_hz: s.frequency_hz,
                duration_ms: s.duration_ms,
            };
            CnStatus::CnOk
        }
        None => {
            set_error(format!(
                "cn_trial_stimulus: index {index} out of range for {} stimuli",
                t.record.stimuli.len()
            ));
            CnStatus::CnIndexOutOfRange
        }
    }
}

fn metric_status<E: std::fmt::Display>(e: E) -> CnStatus {
    set_error(e.to_string());
    CnStatus::CnUndefinedMetric
}

/// Tracking error of a successful trial, mm.
///
/// # Safety
/// `trial` must be a valid trial handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_tracking_error_mm(
    trial: *const CnTrial,
    out: *mut f64,
) -> CnStatus {
    if out.is_null() {
        set_error("cn_trial_tracking_error_mm: NULL out pointer");
        return CnStatus::CnNullArgument;
    }
    let t = match trial_ref(trial, "cn_trial_tracking_error_mm") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match tracking_error(&t.record, &t.path) {
        Ok(v) => {
            *out = v;
            CnStatus::CnOk
        }
        Err(e) => metric_status(e),
    }
}

/// Navigation time of a successful trial, seconds.
///
/// # Safety
/// `trial` must be a valid trial handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_navigation_time_s(
    trial: *const CnTrial,
    out: *mut f64,
) -> CnStatus {
    if out.is_null() {
        set_error("cn_trial_navigation_time_s: NULL out pointer");
        return CnStatus::CnNullArgument;
    }
    let t = match trial_ref(trial, "cn_trial_navigation_time_s") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match navigation_time(&t.record) {
        Ok(v) => {
            *out = v;
            CnStatus::CnOk
        }
        Err(e) => metric_status(e),
    }
}

/// Stimulus count of a successful trial.
///
/// # Safety
/// `trial` must be a valid trial handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_control_effort(
    trial: *const CnTrial,
    out: *mut usize,
) -> CnStatus {
    if out.is_null() {
        set_error("cn_trial_control_effort: NULL out pointer");
        return CnStatus::CnNullArgument;
    }
    let t = match trial_ref(trial, "cn_trial_control_effort") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match control_effort(&t.record) {
        Ok(v) => {
            *out = v;
            CnStatus::CnOk
        }
        Err(e) => metric_status(e),
    }
}

/// Write the trial to a JSONL log file at `path`.
///
/// # Safety
/// `trial` must be a valid trial handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cn_trial_write_jsonl(
    trial: *const CnTrial,
    path: *const c_char,
) -> CnStatus {
    if path.is_null() {
        set_error("cn_trial_write_jsonl: NULL path");
        return CnStatus::CnNullArgument;
    }
    let t = match trial_ref(trial, "cn_trial_write_jsonl") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => {
            set_error("cn_trial_write_jsonl: path is not valid UTF-8");
            return CnStatus::CnInvalidUtf8;
        }
    };
    match write_record_to_path(std::path::Path::new(path), &t.record) {
        Ok(()) => CnStatus::CnOk,
        Err(e) => {
            set_error(e.to_string());
            CnStatus::CnIoError
        }
    }
}
