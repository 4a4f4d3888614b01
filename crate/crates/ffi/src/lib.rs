//! C ABI over the `grcc` dispatch library.
//!
//! Objects cross the boundary as opaque handles created by `*_load`,
//! `*_parse` or `grcc_solve` and released with the matching `*_free`.
//! Every fallible call returns a [`GrccStatus`]; on failure the message is
//! available from [`grcc_last_error`] on the same thread until the next
//! failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use grcc::case::{load_case, parse_case, PowerCase};
use grcc::config::{load_config, parse_config, StudyConfig};
use grcc::drcc::{safety_factor_raw, SafetyBranch};
use grcc::model::SafetyRule;
use grcc::risk::{estimate_risk, sample_scenarios, Family};
use grcc::study::{prepare, run_dispatch, Dispatch, Formulation, Prepared};
use grcc::{Error, ErrorCategory};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Usage = 3,
    Parse = 4,
    Assembly = 5,
    Solver = 6,
    Certification = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrccFormulation {
    Rlt = 0,
    Cone = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrccFamily {
    Gaussian = 0,
    Laplace = 1,
    Logistic = 2,
}

/// Which closed form produced a safety factor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrccSafetyBranch {
    MeanAndSpread = 0,
    SpreadOnly = 1,
}

/// Opaque power case.
pub struct GrccCase(PowerCase);

/// Opaque study configuration.
pub struct GrccConfig(StudyConfig);

/// Opaque solved dispatch, with the prepared model it came from.
pub struct GrccDispatch {
    prep: Prepared,
    dispatch: Dispatch,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(err: Error) -> GrccStatus {
    set_error(err.to_string());
    match err.category() {
        ErrorCategory::Usage => GrccStatus::Usage,
        ErrorCategory::Parse => GrccStatus::Parse,
        ErrorCategory::Assembly => GrccStatus::Assembly,
        ErrorCategory::Solver => GrccStatus::Solver,
        ErrorCategory::Certification => GrccStatus::Certification,
    }
}

/// Run `f`, turning panics into `GrccStatus::Panic`.
fn guard(f: impl FnOnce() -> GrccStatus) -> GrccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            GrccStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, GrccStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(GrccStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        GrccStatus::InvalidUtf8
    })
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, GrccStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        GrccStatus::NullPointer
    })
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> GrccStatus {
    *out = Box::into_raw(Box::new(value));
    GrccStatus::Ok
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn grcc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn grcc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Safety factor k for risk level `eps` and radii `gamma1`, `gamma2`.
///
/// # Safety
/// `k_out` must be valid for writes; `branch_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn grcc_safety_factor(
    eps: f64,
    gamma1: f64,
    gamma2: f64,
    k_out: *mut f64,
    branch_out: *mut GrccSafetyBranch,
) -> GrccStatus {
    guard(|| {
        if k_out.is_null() {
            set_error("null output pointer");
            return GrccStatus::NullPointer;
        }
        match safety_factor_raw(eps, gamma1, gamma2) {
            Ok((k, b)) => {
                *k_out = k;
                if !branch_out.is_null() {
                    *branch_out = match b {
                        SafetyBranch::MeanAndSpread => GrccSafetyBranch::MeanAndSpread,
                        SafetyBranch::SpreadOnly => GrccSafetyBranch::SpreadOnly,
                    };
                }
                GrccStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a case file (MATPOWER `.m` or native TOML).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn grcc_case_load(path: *const c_char, out: *mut *mut GrccCase) -> GrccStatus {
    guard(|| {
        let path = tri!(str_arg(path));
        if out.is_null() {
            set_error("null output pointer");
            return GrccStatus::NullPointer;
        }
        match load_case(path) {
            Ok(c) => put(out, GrccCase(c)),
            Err(e) => fail(e),
        }
    })
}

/// Parse case text held in memory.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn grcc_case_parse(text: *const c_char, out: *mut *mut GrccCase) -> GrccStatus {
    guard(|| {
        let text = tri!(str_arg(text));
        if out.is_null() {
            set_error("null output pointer");
            return GrccStatus::NullPointer;
        }
        match parse_case(text) {
            Ok(c) => put(out, GrccCase(c)),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `case` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn grcc_case_free(case: *mut GrccCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Number of generators, buses and branches of a case.
///
/// # Safety
/// `case` must be a valid handle; each output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn grcc_case_dims(
    case: *const GrccCase,
    n_gen: *mut usize,
    n_bus: *mut usize,
    n_branch: *mut usize,
) -> GrccStatus {
    guard(|| {
        let c = &tri!(ref_arg(case)).0;
        for (p, v) in [(n_gen, c.generators.len()), (n_bus, c.buses.len()), (n_branch, c.branches.len())] {
            if !p.is_null() {
                *p = v;
            }
        }
        GrccStatus::Ok
    })
}

/// Load a study config for `case`. A NULL `path` yields the defaults.
///
/// # Safety
/// `path` must be NULL or NUL-terminated; `case` a valid handle; `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn grcc_config_load(
    path: *const c_char,
    case: *const GrccCase,
    out: *mut *mut GrccConfig,
) -> GrccStatus {
    guard(|| {
        let case = &tri!(ref_arg(case)).0;
        if out.is_null() {
            set_error("null output pointer");
            return GrccStatus::NullPointer;
        }
        let cfg = if path.is_null() {
            Ok(StudyConfig::defaults_for(case))
        } else {
            load_config(tri!(str_arg(path)), case)
        };
        match cfg {
            Ok(c) => put(out, GrccConfig(c)),
            Err(e) => fail(e),
        }
    })
}

/// Parse config text held in memory.
///
/// # Safety
/// As for [`grcc_config_load`], with `text` non-NULL.
#[no_mangle]
pub unsafe extern "C" fn grcc_config_parse(
    text: *const c_char,
    case: *const GrccCase,
    out: *mut *mut GrccConfig,
) -> GrccStatus {
    guard(|| {
        let text = tri!(str_arg(text));
        let case = &tri!(ref_arg(case)).0;
        if out.is_null() {
            set_error("null output pointer");
            return GrccStatus::NullPointer;
        }
        match parse_config(text, case) {
            Ok(c) => put(out, GrccConfig(c)),
            Err(e) => fail(e),
        }
    })
}

/// Replace γ₁ and γ₂.
///
/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn grcc_config_set_gammas(cfg: *mut GrccConfig, gamma1: f64, gamma2: f64) -> GrccStatus {
    guard(|| {
        let Some(c) = cfg.as_mut() else {
            set_error("null handle");
            return GrccStatus::NullPointer;
        };
        if !(gamma1 >= 0.0 && gamma2 >= 1.0 && gamma1.is_finite() && gamma2.is_finite()) {
            set_error(format!("γ₁ = {gamma1}, γ₂ = {gamma2}: need γ₁ ≥ 0, γ₂ ≥ 1"));
            return GrccStatus::Parse;
        }
        c.0 = c.0.with_gammas(gamma1, gamma2);
        GrccStatus::Ok
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn grcc_config_free(cfg: *mut GrccConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Assemble and solve. A non-optimal solve returns `Solver` and no handle.
///
/// # Safety
/// `case` and `cfg` must be valid handles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn grcc_solve(
    case: *const GrccCase,
    cfg: *const GrccConfig,
    formulation: GrccFormulation,
    out: *mut *mut GrccDispatch,
) -> GrccStatus {
    guard(|| {
        let case = &tri!(ref_arg(case)).0;
        let cfg = &tri!(ref_arg(cfg)).0;
        if out.is_null() {
            set_error("null output pointer");
            return GrccStatus::NullPointer;
        }
        let f = match formulation {
            GrccFormulation::Rlt => Formulation::Rlt,
            GrccFormulation::Cone => Formulation::Cone,
        };
        let (prep, dispatch) = match run_dispatch(case, cfg, SafetyRule::Robust, f) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        if let Err(e) = dispatch.require_optimal() {
            return fail(e);
        }
        put(out, GrccDispatch { prep, dispatch })
    })
}

/// # Safety
/// `d` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn grcc_dispatch_free(d: *mut GrccDispatch) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Objective Z and the certification outcome of a dispatch.
///
/// # Safety
/// `d` must be a valid handle; each output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn grcc_dispatch_summary(
    d: *const GrccDispatch,
    objective: *mut f64,
    certified: *mut bool,
    max_violation: *mut f64,
) -> GrccStatus {
    guard(|| {
        let d = &tri!(ref_arg(d)).dispatch;
        if !objective.is_null() {
            *objective = d.objective.unwrap_or(f64::NAN);
        }
        if !certified.is_null() {
            *certified = d.certified();
        }
        if !max_violation.is_null() {
            *max_violation = d.certification.as_ref().map_or(f64::NAN, |c| c.max_violation);
        }
        GrccStatus::Ok
    })
}

/// Copy base points and participation factors into caller buffers of
/// length `len` each. `len` below the generator count yields
/// `BufferTooSmall`; query the count with [`grcc_case_dims`].
///
/// # Safety
/// `d` must be a valid handle; `p` and `alpha` valid for `len` writes or NULL.
#[no_mangle]
pub unsafe extern "C" fn grcc_dispatch_copy(
    d: *const GrccDispatch,
    p: *mut f64,
    alpha: *mut f64,
    len: usize,
) -> GrccStatus {
    guard(|| {
        let d = &tri!(ref_arg(d)).dispatch;
        if len < d.p.len() {
            set_error(format!("buffer of {len} for {} generators", d.p.len()));
            return GrccStatus::BufferTooSmall;
        }
        for (dst, src) in [(p, &d.p), (alpha, &d.alpha)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
            }
        }
        GrccStatus::Ok
    })
}

/// Monte Carlo maximum violation probability of a dispatch, with scenarios
/// drawn from the config's nominal moments.
///
/// # Safety
/// `d` must be a valid handle; `max_violation` valid for writes;
/// `std_error` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn grcc_dispatch_risk(
    d: *const GrccDispatch,
    family: GrccFamily,
    samples: usize,
    seed: u64,
    max_violation: *mut f64,
    std_error: *mut f64,
) -> GrccStatus {
    guard(|| {
        let h = tri!(ref_arg(d));
        if max_violation.is_null() {
            set_error("null output pointer");
            return GrccStatus::NullPointer;
        }
        let family = match family {
            GrccFamily::Gaussian => Family::Gaussian,
            GrccFamily::Laplace => Family::Laplace,
            GrccFamily::Logistic => Family::Logistic,
        };
        let cfg = &h.prep.cfg;
        let mu = nalgebra::DVector::from_column_slice(&cfg.mu0);
        let rep = sample_scenarios(family, &mu, &cfg.sigma0, samples, seed)
            .and_then(|set| estimate_risk(&h.dispatch.x(), &set, &h.prep.case, &h.prep.sf));
        match rep {
            Ok(r) => {
                *max_violation = r.max_violation;
                if !std_error.is_null() {
                    *std_error = r.max_std_error;
                }
                GrccStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Check that a case and config assemble, without solving.
///
/// # Safety
/// `case` and `cfg` must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn grcc_check(case: *const GrccCase, cfg: *const GrccConfig) -> GrccStatus {
    guard(|| {
        let case = &tri!(ref_arg(case)).0;
        let cfg = &tri!(ref_arg(cfg)).0;
        match prepare(case, cfg, SafetyRule::Robust) {
            Ok(_) => GrccStatus::Ok,
            Err(e) => fail(e),
        }
    })
}
