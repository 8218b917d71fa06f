//! C ABI over the `subexp` library.
//!
//! Domains and expressions are opaque handles created from text and released
//! with the matching `_free`. Every fallible call returns a [`SubexpStatus`];
//! the message of the last failure on the calling thread is available from
//! [`subexp_last_error_message`].

#![allow(clippy::too_many_arguments)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use subexp::domain::{build_domain, CredalDomain, DomainSpec, ThetaVector};
use subexp::engine::{lower_expectation_with, upper_expectation_with, EngineOptions, Method, RandomVariable};
use subexp::expr::{Expr, Scope};
use subexp::independence::{peng_independent_expectation, per_theta_independent_expectation, TestFunction};
use subexp::lln::mu_bounds;
use subexp::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubexpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed spec, bad argument or I/O failure.
    InvalidSpec = 3,
    Syntax = 4,
    /// Bound evaluation failed or bounds are out of order.
    Domain = 5,
    Infeasible = 6,
    /// The requested method does not apply or exceeds its size cap.
    Unsupported = 7,
    /// A convergence check failed.
    Harness = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubexpMethod {
    Auto = 0,
    NestedExact = 1,
    NestedNumeric = 2,
    Grid = 3,
    Transform = 4,
}

impl From<SubexpMethod> for Method {
    fn from(m: SubexpMethod) -> Self {
        match m {
            SubexpMethod::Auto => Method::Auto,
            SubexpMethod::NestedExact => Method::NestedExact,
            SubexpMethod::NestedNumeric => Method::NestedNumeric,
            SubexpMethod::Grid => Method::Grid,
            SubexpMethod::Transform => Method::Transform,
        }
    }
}

impl From<Method> for SubexpMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => SubexpMethod::Auto,
            Method::NestedExact => SubexpMethod::NestedExact,
            Method::NestedNumeric => SubexpMethod::NestedNumeric,
            Method::Grid => SubexpMethod::Grid,
            Method::Transform => SubexpMethod::Transform,
        }
    }
}

/// Scalar part of an expectation result. The maximizing weights go to a
/// caller-supplied buffer.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubexpResult {
    pub value: f64,
    pub certified_error: f64,
    /// Method that produced the value.
    pub method: SubexpMethod,
}

/// Opaque credal domain.
pub struct SubexpDomain(CredalDomain);

/// Opaque expression in the variables `x` and `y`.
pub struct SubexpExpr(Expr);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SubexpStatus {
    match e {
        Error::Syntax { .. } | Error::VariableOutOfScope { .. } => SubexpStatus::Syntax,
        Error::Domain(_) | Error::BoundOrderViolation { .. } | Error::GapBudgetViolation { .. } => SubexpStatus::Domain,
        Error::InfeasibleDomain(_) | Error::NoSuchN { .. } => SubexpStatus::Infeasible,
        Error::MethodUnsupported(_) | Error::MethodInfeasible(_) => SubexpStatus::Unsupported,
        Error::MonotonicityViolated { .. } | Error::DominationViolated { .. } | Error::NonConvergence(_) => {
            SubexpStatus::Harness
        }
        _ => SubexpStatus::InvalidSpec,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), SubexpStatus>) -> SubexpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SubexpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            SubexpStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SubexpStatus>;
}

impl<T> OrStatus<T> for subexp::Result<T> {
    fn or_status(self) -> Result<T, SubexpStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

fn null(what: &str) -> SubexpStatus {
    set_error(format!("{what} is null"));
    SubexpStatus::NullPointer
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SubexpStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SubexpStatus::InvalidUtf8
    })
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], SubexpStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn domain_ref<'a>(d: *const SubexpDomain) -> Result<&'a CredalDomain, SubexpStatus> {
    d.as_ref().map(|d| &d.0).ok_or_else(|| null("domain"))
}

unsafe fn rv(p: *const f64, len: usize, what: &str) -> Result<RandomVariable, SubexpStatus> {
    RandomVariable::new(slice(p, len, what)?.to_vec()).or_status()
}

/// Builds a domain from its JSON spec and stores the handle in `out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subexp_domain_from_json(json: *const c_char, out: *mut *mut SubexpDomain) -> SubexpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec: DomainSpec = serde_json::from_str(text(json, "json")?).map_err(|e| {
            set_error(format!("invalid spec: {e}"));
            SubexpStatus::InvalidSpec
        })?;
        let d = build_domain(&spec).or_status()?;
        *out = Box::into_raw(Box::new(SubexpDomain(d)));
        Ok(())
    })
}

/// # Safety
/// `d` must come from [`subexp_domain_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn subexp_domain_free(d: *mut SubexpDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live domain handle.
#[no_mangle]
pub unsafe extern "C" fn subexp_domain_n_states(d: *const SubexpDomain) -> usize {
    d.as_ref().map_or(0, |d| d.0.n_states())
}

/// Writes 1 to `out` if the weight vector lies in the domain within `tol`,
/// else 0.
///
/// # Safety
/// `theta` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn subexp_contains(
    d: *const SubexpDomain,
    theta: *const f64,
    len: usize,
    tol: f64,
    out: *mut i32,
) -> SubexpStatus {
    guard(|| {
        let d = domain_ref(d)?;
        let t = slice(theta, len, "theta")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d.contains(&ThetaVector(t.to_vec()), tol) as i32;
        Ok(())
    })
}

unsafe fn expectation(
    lower: bool,
    d: *const SubexpDomain,
    values: *const f64,
    len: usize,
    method: SubexpMethod,
    grid_resolution: usize,
    out: *mut SubexpResult,
    argmax: *mut f64,
    argmax_len: usize,
) -> SubexpStatus {
    guard(|| {
        let d = domain_ref(d)?;
        let x = rv(values, len, "values")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut opts = EngineOptions::default();
        if grid_resolution > 0 {
            opts.grid_resolution = grid_resolution;
        }
        let r = if lower {
            lower_expectation_with(&x, d, method.into(), &opts)
        } else {
            upper_expectation_with(&x, d, method.into(), &opts)
        }
        .or_status()?;
        *out = SubexpResult {
            value: r.value,
            certified_error: r.certified_error,
            method: r.method.into(),
        };
        if !argmax.is_null() {
            let w = r.argmax_theta.weights();
            if argmax_len < w.len() {
                set_error(format!("argmax buffer holds {argmax_len}, need {}", w.len()));
                return Err(SubexpStatus::BufferTooSmall);
            }
            ptr::copy_nonoverlapping(w.as_ptr(), argmax, w.len());
        }
        Ok(())
    })
}

/// Upper expectation of the random variable `values[0..len]`.
///
/// `grid_resolution` of 0 keeps the default. `argmax` may be null; otherwise
/// it receives the maximizing weights and must hold `n_states` doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn subexp_upper_expectation(
    d: *const SubexpDomain,
    values: *const f64,
    len: usize,
    method: SubexpMethod,
    grid_resolution: usize,
    out: *mut SubexpResult,
    argmax: *mut f64,
    argmax_len: usize,
) -> SubexpStatus {
    expectation(false, d, values, len, method, grid_resolution, out, argmax, argmax_len)
}

/// Lower expectation; arguments as for [`subexp_upper_expectation`].
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn subexp_lower_expectation(
    d: *const SubexpDomain,
    values: *const f64,
    len: usize,
    method: SubexpMethod,
    grid_resolution: usize,
    out: *mut SubexpResult,
    argmax: *mut f64,
    argmax_len: usize,
) -> SubexpStatus {
    expectation(true, d, values, len, method, grid_resolution, out, argmax, argmax_len)
}

/// Lower and upper mean of `values` over the domain.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn subexp_mu_bounds(
    d: *const SubexpDomain,
    values: *const f64,
    len: usize,
    mu_lower: *mut f64,
    mu_upper: *mut f64,
) -> SubexpStatus {
    guard(|| {
        let d = domain_ref(d)?;
        let x = rv(values, len, "values")?;
        if mu_lower.is_null() || mu_upper.is_null() {
            return Err(null("output"));
        }
        let md = mu_bounds(&x, d).or_status()?;
        *mu_lower = md.mu_lower;
        *mu_upper = md.mu_upper;
        Ok(())
    })
}

/// Parses an expression in `x` and `y`.
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn subexp_expr_parse(source: *const c_char, out: *mut *mut SubexpExpr) -> SubexpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let e = Expr::parse(text(source, "source")?, Scope::bivariate()).or_status()?;
        *out = Box::into_raw(Box::new(SubexpExpr(e)));
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a live expression handle.
#[no_mangle]
pub unsafe extern "C" fn subexp_expr_eval(e: *const SubexpExpr, x: f64, y: f64, out: *mut f64) -> SubexpStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("expr"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = e.0.eval_xy(x, y).or_status()?;
        Ok(())
    })
}

/// # Safety
/// `e` must come from [`subexp_expr_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn subexp_expr_free(e: *mut SubexpExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

unsafe fn independent(
    peng: bool,
    phi: *const c_char,
    bound_m: f64,
    lipschitz_l: f64,
    x: *const f64,
    y: *const f64,
    len: usize,
    d: *const SubexpDomain,
    grid_resolution: usize,
    out: *mut SubexpResult,
) -> SubexpStatus {
    guard(|| {
        let d = domain_ref(d)?;
        let phi = TestFunction::bivariate(text(phi, "phi")?, bound_m, lipschitz_l).or_status()?;
        let x = rv(x, len, "x")?;
        let y = rv(y, len, "y")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let res = if grid_resolution > 0 { grid_resolution } else { 201 };
        let r = if peng {
            let opts = EngineOptions {
                grid_resolution: res,
                ..EngineOptions::default()
            };
            peng_independent_expectation(&phi, &x, &y, d, Method::Auto, &opts)
        } else {
            per_theta_independent_expectation(&phi, &x, &y, d, res)
        }
        .or_status()?;
        *out = SubexpResult {
            value: r.value,
            certified_error: r.certified_error,
            method: r.method.into(),
        };
        Ok(())
    })
}

/// `sup_theta E_theta[phi(X, Y)]` with X and Y independent under each theta.
///
/// # Safety
/// `phi` must be NUL-terminated; `x` and `y` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn subexp_per_theta_independent(
    phi: *const c_char,
    bound_m: f64,
    lipschitz_l: f64,
    x: *const f64,
    y: *const f64,
    len: usize,
    d: *const SubexpDomain,
    grid_resolution: usize,
    out: *mut SubexpResult,
) -> SubexpStatus {
    independent(false, phi, bound_m, lipschitz_l, x, y, len, d, grid_resolution, out)
}

/// `E[ E[phi(x, Y)] at x = X ]`, the nested form.
///
/// # Safety
/// As for [`subexp_per_theta_independent`].
#[no_mangle]
pub unsafe extern "C" fn subexp_peng_independent(
    phi: *const c_char,
    bound_m: f64,
    lipschitz_l: f64,
    x: *const f64,
    y: *const f64,
    len: usize,
    d: *const SubexpDomain,
    grid_resolution: usize,
    out: *mut SubexpResult,
) -> SubexpStatus {
    independent(true, phi, bound_m, lipschitz_l, x, y, len, d, grid_resolution, out)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn subexp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn subexp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
