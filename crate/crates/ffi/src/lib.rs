//! C ABI over the `prefrl` experiment harness.
//!
//! Every fallible function returns a [`PrefrlStatus`]; on failure the message
//! is available from [`prefrl_last_error`] on the same thread. Experiments
//! are opaque handles created by [`prefrl_experiment_from_json`] and released
//! with [`prefrl_experiment_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use prefrl::estimation::{beta, BetaParams};
use prefrl::harness::{
    run_experiment, sublinearity_metric, write_outputs, ExperimentConfig, ExperimentResult,
};
use prefrl::known::alpha;
use prefrl::{kappa, sigmoid, Error};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    NotRun = 8,
    Panic = 9,
    Internal = 10,
}

/// Which regret curve to read.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefrlRegret {
    Score = 0,
    Preference = 1,
}

/// Opaque experiment handle.
pub struct PrefrlExperiment {
    config: ExperimentConfig,
    result: Option<ExperimentResult>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PrefrlStatus {
    match err.root() {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidMdp(_)
        | Error::InvalidPolicy(_)
        | Error::InvalidFeatures(_)
        | Error::DimensionMismatch { .. }
        | Error::Coverage(_) => PrefrlStatus::Config,
        Error::InvalidArgument(_)
        | Error::EnumerationRequired(_)
        | Error::EnumerationTooLarge { .. } => PrefrlStatus::InvalidArgument,
        Error::NonConvergence { .. }
        | Error::ProjectionStagnation(_)
        | Error::NotPositiveDefinite => PrefrlStatus::Numerical,
        Error::Io(_) | Error::Csv(_) => PrefrlStatus::Io,
        _ => PrefrlStatus::Internal,
    }
}

struct Failure(PrefrlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PrefrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrefrlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside prefrl");
            PrefrlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PrefrlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            PrefrlStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn result_of(exp: &PrefrlExperiment) -> Result<&ExperimentResult, Failure> {
    exp.result
        .as_ref()
        .ok_or_else(|| Failure(PrefrlStatus::NotRun, "experiment has not been run".into()))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn prefrl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a JSON experiment configuration.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_from_json(
    json: *const c_char,
    out: *mut *mut PrefrlExperiment,
) -> PrefrlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let config = ExperimentConfig::from_json(read_str(json, "json")?)?;
        out.write(Box::into_raw(Box::new(PrefrlExperiment {
            config,
            result: None,
        })));
        Ok(())
    })
}

/// Runs every configured seed. Running again replaces earlier results.
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_run(exp: *mut PrefrlExperiment) -> PrefrlStatus {
    guard(|| {
        let exp = exp.as_mut().ok_or_else(|| null("experiment"))?;
        exp.result = Some(run_experiment(&exp.config)?);
        Ok(())
    })
}

/// Number of rounds per seed.
///
/// # Safety
/// `exp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_rounds(
    exp: *const PrefrlExperiment,
    out: *mut usize,
) -> PrefrlStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        write_out(out, exp.config.rounds, "out")
    })
}

/// Number of seeds.
///
/// # Safety
/// `exp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_num_seeds(
    exp: *const PrefrlExperiment,
    out: *mut usize,
) -> PrefrlStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        write_out(out, exp.config.seeds.len(), "out")
    })
}

/// Copies the seed-mean cumulative regret curve into `buf`, which must
/// hold at least `rounds` values.
///
/// # Safety
/// `exp` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_mean_curve(
    exp: *const PrefrlExperiment,
    kind: PrefrlRegret,
    buf: *mut f64,
    len: usize,
) -> PrefrlStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let res = result_of(exp)?;
        let curve = match kind {
            PrefrlRegret::Score => res.curve.mean_scr(),
            PrefrlRegret::Preference => res.curve.mean_pref(),
        };
        if curve.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < curve.len() {
            return Err(Failure(
                PrefrlStatus::BufferTooSmall,
                format!("buffer holds {len} values, curve has {}", curve.len()),
            ));
        }
        ptr::copy_nonoverlapping(curve.as_ptr(), buf, curve.len());
        Ok(())
    })
}

/// Final cumulative regret: mean and standard error across seeds.
///
/// # Safety
/// `exp` must be a live handle; `mean` and `se` writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_final(
    exp: *const PrefrlExperiment,
    kind: PrefrlRegret,
    mean: *mut f64,
    se: *mut f64,
) -> PrefrlStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let res = result_of(exp)?;
        let agg = match kind {
            PrefrlRegret::Score => res.curve.final_scr(),
            PrefrlRegret::Preference => res.curve.final_pref(),
        };
        let (m, s) = agg.map_or((0.0, 0.0), |a| (a.mean, a.se));
        write_out(mean, m, "mean")?;
        write_out(se, s, "se")
    })
}

/// Whether every invariant check passed.
///
/// # Safety
/// `exp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_passed(
    exp: *const PrefrlExperiment,
    out: *mut bool,
) -> PrefrlStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        write_out(out, result_of(exp)?.passed(), "out")
    })
}

/// Writes `curve.csv`, `summary.json` (and `curve.svg` when configured)
/// into `dir`.
///
/// # Safety
/// `exp` must be a live handle and `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_write(
    exp: *const PrefrlExperiment,
    dir: *const c_char,
) -> PrefrlStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let dir = read_str(dir, "dir")?;
        write_outputs(result_of(exp)?, Path::new(dir), exp.config.plot)?;
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `exp` must come from [`prefrl_experiment_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn prefrl_experiment_free(exp: *mut PrefrlExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Logistic link.
#[no_mangle]
pub extern "C" fn prefrl_sigmoid(x: f64) -> f64 {
    sigmoid(x)
}

/// `κ = 2 + e^{SB} + e^{−SB}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_kappa(
    feature_bound: f64,
    param_bound: f64,
    out: *mut f64,
) -> PrefrlStatus {
    guard(|| write_out(out, kappa(feature_bound, param_bound)?, "out"))
}

/// Confidence radius `β_t(δ)`, with `κ` derived from `B` and `S`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_beta(
    t: f64,
    delta: f64,
    lambda: f64,
    param_bound: f64,
    feature_bound: f64,
    dim: usize,
    out: *mut f64,
) -> PrefrlStatus {
    guard(|| {
        let params = BetaParams {
            delta,
            lambda,
            param_bound,
            feature_bound,
            dim,
            kappa: kappa(feature_bound, param_bound)?,
        };
        write_out(out, beta(t, &params)?, "out")
    })
}

/// `α_{d,T}(δ) = 20BS√(d log(T(1 + 2T)/δ))`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_alpha(
    dim: usize,
    rounds: usize,
    delta: f64,
    feature_bound: f64,
    param_bound: f64,
    out: *mut f64,
) -> PrefrlStatus {
    guard(|| {
        write_out(
            out,
            alpha(dim, rounds, delta, feature_bound, param_bound)?,
            "out",
        )
    })
}

/// Log-log slope of a cumulative regret curve over its last three quarters.
///
/// # Safety
/// `curve` must be valid for `len` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prefrl_sublinearity_metric(
    curve: *const f64,
    len: usize,
    out: *mut f64,
) -> PrefrlStatus {
    guard(|| {
        if curve.is_null() && len > 0 {
            return Err(null("curve"));
        }
        let values = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(curve, len)
        };
        write_out(out, sublinearity_metric(values)?, "out")
    })
}
