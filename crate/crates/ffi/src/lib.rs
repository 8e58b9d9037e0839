//! C ABI over the `gammareg` core.
//!
//! Objects cross the boundary as opaque pointers created by `gr_*_new` or
//! `gr_*_parse` and released by the matching `gr_*_free`. Every fallible
//! call returns a [`GrStatus`]; on failure the message is kept per thread
//! and can be copied out with [`gr_last_error`]. Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gammareg::config::ExperimentConfig;
use gammareg::gamma::{gamma_norm_hilbert, gamma_norm_mc, hardy_check, StepFunction, TimeGrid, Weight};
use gammareg::maxreg::maxreg_constant;
use gammareg::sectorial::{sqfn_norm, HoloFn, SectorialOp};
use gammareg::space::SpaceModel;
use gammareg::suites::{run_suite, SuiteReport};
use gammareg::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    Parse = 4,
    /// Singular, non-sectorial or otherwise unusable operator.
    Operator = 5,
    SmallnessViolation = 6,
    SpecViolation = 7,
    /// Any other numerical failure: divergence, insufficient grid, failed certificate.
    Numerical = 8,
    Io = 9,
    Panic = 10,
}

/// Dense sectorial operator.
pub struct GrOperator(SectorialOp);
/// Piecewise-constant function of time with values in `ℓ^q_n`.
pub struct GrStep(StepFunction);
/// Parsed run configuration.
pub struct GrConfig(ExperimentConfig);
/// Outcome of one suite.
pub struct GrReport(SuiteReport);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> GrStatus {
    match e {
        Error::InvalidInput(_) | Error::MethodMismatch(_) | Error::Unsupported(_) | Error::Precondition(_) => {
            GrStatus::InvalidInput
        }
        Error::Singular(_) | Error::NotSectorial(_) | Error::NotAnalytic(_) => GrStatus::Operator,
        Error::SmallnessViolation { .. } => GrStatus::SmallnessViolation,
        Error::SpecViolation(_) | Error::ContractViolation(_) => GrStatus::SpecViolation,
        Error::InvalidConfig(_) => GrStatus::InvalidConfig,
        Error::Parse { .. } => GrStatus::Parse,
        Error::Io(_) => GrStatus::Io,
        Error::Certificate(_) | Error::InsufficientGrid(_) | Error::Divergence { .. } | Error::NonSplittable { .. } => {
            GrStatus::Numerical
        }
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            GrStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GrStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside gammareg".into());
            GrStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail::Core(Error::InvalidInput(format!("{what}: {e}"))))
}

/// Copies `s` into `buf` with a trailing NUL, truncating to `len`. Returns
/// the buffer size needed for the whole string.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize) -> usize {
    if !buf.is_null() && len > 0 {
        let n = s.len().min(len - 1);
        ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
    }
    s.len() + 1
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message. Returns the size needed.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_out(&e.borrow(), buf, len))
}

/// Operator from an `n × n` row-major matrix.
///
/// # Safety
/// `data` must hold `n * n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_operator_new(n: usize, data: *const f64, out: *mut *mut GrOperator) -> GrStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let m = DMatrix::from_row_slice(n, n, slice(data, n * n, "data")?);
        *out = boxed(GrOperator(SectorialOp::new(m)?));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or come from [`gr_operator_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gr_operator_free(op: *mut GrOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Step function with `intervals + 1` increasing knots and one vector of
/// length `dim` per interval, stored consecutively in `values`.
///
/// # Safety
/// `knots` must hold `intervals + 1` doubles, `values` `intervals * dim`.
#[no_mangle]
pub unsafe extern "C" fn gr_step_new(
    intervals: usize,
    knots: *const f64,
    dim: usize,
    values: *const f64,
    q: f64,
    out: *mut *mut GrStep,
) -> GrStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let grid = TimeGrid::new(slice(knots, intervals + 1, "knots")?.to_vec(), Weight::Lebesgue)?;
        let v = slice(values, intervals * dim, "values")?;
        let vals = (0..intervals).map(|i| DVector::from_column_slice(&v[i * dim..(i + 1) * dim])).collect();
        *out = boxed(GrStep(StepFunction::from_vectors(grid, vals, SpaceModel::new(dim, q)?)?));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or come from [`gr_step_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gr_step_free(f: *mut GrStep) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Exact γ-norm; needs `q = 2`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_gamma_norm_hilbert(f: *const GrStep, value: *mut f64) -> GrStatus {
    guard(|| {
        let f = as_ref(f, "f")?;
        *as_mut(value, "value")? = gamma_norm_hilbert(&f.0)?.value;
        Ok(())
    })
}

/// Monte Carlo γ-norm with its standard error.
///
/// # Safety
/// Pointers must be valid; `stderr_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn gr_gamma_norm_mc(
    f: *const GrStep,
    samples: usize,
    seed: u64,
    value: *mut f64,
    stderr_out: *mut f64,
) -> GrStatus {
    guard(|| {
        let f = as_ref(f, "f")?;
        let value = as_mut(value, "value")?;
        let e = gamma_norm_mc(&f.0, samples, seed)?;
        *value = e.value;
        if let Some(s) = stderr_out.as_mut() {
            *s = e.stderr;
        }
        Ok(())
    })
}

/// Both sides of the weighted Hardy inequality, the constant included in `rhs`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_hardy_check(f: *const GrStep, alpha: f64, lhs: *mut f64, rhs: *mut f64) -> GrStatus {
    guard(|| {
        let f = as_ref(f, "f")?;
        let (lhs, rhs) = (as_mut(lhs, "lhs")?, as_mut(rhs, "rhs")?);
        let p = hardy_check(&f.0, alpha)?;
        *lhs = p.lhs;
        *rhs = p.rhs;
        Ok(())
    })
}

/// Square-function norm of `x` for `φ(z) = z^{1/2}e^{−z}` in `ℓ^q_n`.
///
/// # Safety
/// `x` must hold as many doubles as the operator dimension.
#[no_mangle]
pub unsafe extern "C" fn gr_sqfn_norm(a: *const GrOperator, x: *const f64, q: f64, value: *mut f64) -> GrStatus {
    guard(|| {
        let a = as_ref(a, "a")?;
        let value = as_mut(value, "value")?;
        let n = a.0.dim();
        let x = DVector::from_column_slice(slice(x, n, "x")?);
        *value = sqfn_norm(&a.0, &HoloFn::sqrt_exp(), &x, &SpaceModel::new(n, q)?)?.value;
        Ok(())
    })
}

/// Largest observed maximal-regularity ratio over seeded random forcings in `ℓ²`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_maxreg_constant(a: *const GrOperator, trials: usize, seed: u64, value: *mut f64) -> GrStatus {
    guard(|| {
        let a = as_ref(a, "a")?;
        let value = as_mut(value, "value")?;
        *value = maxreg_constant(&a.0, &SpaceModel::hilbert(a.0.dim()), trials, seed)?.constant;
        Ok(())
    })
}

/// Parses a TOML configuration; an empty string gives the defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gr_config_parse(toml: *const c_char, out: *mut *mut GrConfig) -> GrStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = boxed(GrConfig(ExperimentConfig::parse(text(toml, "toml")?)?));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from [`gr_config_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gr_config_free(cfg: *mut GrConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one suite by name (`"gamma-norm"`, `"heat"`, ...).
///
/// # Safety
/// `suite` must be a NUL-terminated string; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_run_suite(cfg: *const GrConfig, suite: *const c_char, out: *mut *mut GrReport) -> GrStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let out = as_mut(out, "out")?;
        *out = boxed(GrReport(run_suite(text(suite, "suite")?, &cfg.0)?));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or come from [`gr_run_suite`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gr_report_free(r: *mut GrReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// 1 if every check passed, 0 if not, −1 for a null report.
///
/// # Safety
/// `r` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_passed(r: *const GrReport) -> i32 {
    r.as_ref().map_or(-1, |r| i32::from(r.0.passed()))
}

/// # Safety
/// `r` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_check_count(r: *const GrReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.checks.len())
}

/// Value, bound and pass flag of check `i`; `criterion` is 0 when untagged.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_check(
    r: *const GrReport,
    i: usize,
    value: *mut f64,
    bound: *mut f64,
    passed: *mut i32,
    criterion: *mut u8,
) -> GrStatus {
    guard(|| {
        let r = as_ref(r, "r")?;
        let c = r.0.checks.get(i).ok_or_else(|| Error::InvalidInput(format!("check {i} out of range")))?;
        *as_mut(value, "value")? = c.value;
        *as_mut(bound, "bound")? = c.bound;
        *as_mut(passed, "passed")? = i32::from(c.passed);
        *as_mut(criterion, "criterion")? = c.criterion.unwrap_or(0);
        Ok(())
    })
}

/// Copies the name of check `i`. Returns the size needed, 0 if out of range.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gr_report_check_name(r: *const GrReport, i: usize, buf: *mut c_char, len: usize) -> usize {
    match r.as_ref().and_then(|r| r.0.checks.get(i)) {
        Some(c) => copy_out(&c.name, buf, len),
        None => 0,
    }
}

/// Copies the suite CSV. Returns the size needed, 0 for a null report.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gr_report_csv(r: *const GrReport, buf: *mut c_char, len: usize) -> usize {
    match r.as_ref() {
        Some(r) => copy_out(&r.0.csv(), buf, len),
        None => 0,
    }
}
