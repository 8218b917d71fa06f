use std::ffi::{CStr, CString};
use std::ptr;

use subexp_ffi::*;

fn domain(json: &str) -> *mut SubexpDomain {
    let text = CString::new(json).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { subexp_domain_from_json(text.as_ptr(), &mut d) }, SubexpStatus::Ok);
    assert!(!d.is_null());
    d
}

fn last_error() -> String {
    let p = subexp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

const TWO_STATE: &str = r#"{"n_states": 2, "bounds": [{"lower": "0.2", "upper": "0.5"}], "simplex_policy": "enforce"}"#;

fn zero() -> SubexpResult {
    SubexpResult {
        value: 0.0,
        certified_error: 0.0,
        method: SubexpMethod::Auto,
    }
}

#[test]
fn upper_and_lower_with_argmax() {
    let d = domain(TWO_STATE);
    assert_eq!(unsafe { subexp_domain_n_states(d) }, 2);
    let x = [3.0, 1.0];
    let mut r = zero();
    let mut arg = [0.0; 2];
    let s = unsafe { subexp_upper_expectation(d, x.as_ptr(), 2, SubexpMethod::Auto, 0, &mut r, arg.as_mut_ptr(), 2) };
    assert_eq!(s, SubexpStatus::Ok);
    assert!((r.value - 2.0).abs() < 1e-12);
    assert_eq!(r.method, SubexpMethod::NestedExact);
    assert_eq!(arg, [0.5, 0.5]);
    let s = unsafe { subexp_lower_expectation(d, x.as_ptr(), 2, SubexpMethod::Grid, 11, &mut r, ptr::null_mut(), 0) };
    assert_eq!(s, SubexpStatus::Ok);
    assert!((r.value - 1.4).abs() < 1e-12);
    assert_eq!(r.method, SubexpMethod::Grid);
    let s = unsafe { subexp_upper_expectation(d, x.as_ptr(), 2, SubexpMethod::Auto, 0, &mut r, arg.as_mut_ptr(), 1) };
    assert_eq!(s, SubexpStatus::BufferTooSmall);
    unsafe { subexp_domain_free(d) };
}

#[test]
fn error_codes() {
    let bad = CString::new(r#"{"n_states": 2, "bounds": [{"lower": "0.7", "upper": "0.3"}]}"#).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { subexp_domain_from_json(bad.as_ptr(), &mut d) }, SubexpStatus::Domain);
    assert!(d.is_null());
    assert!(last_error().contains("lower 0.7 > upper 0.3"));

    let junk = CString::new("{").unwrap();
    assert_eq!(unsafe { subexp_domain_from_json(junk.as_ptr(), &mut d) }, SubexpStatus::InvalidSpec);
    assert_eq!(unsafe { subexp_domain_from_json(ptr::null(), &mut d) }, SubexpStatus::NullPointer);

    let d = domain(TWO_STATE);
    let x = [1.0, 2.0, 3.0];
    let mut r = zero();
    let s = unsafe { subexp_upper_expectation(d, x.as_ptr(), 3, SubexpMethod::Auto, 0, &mut r, ptr::null_mut(), 0) };
    assert_eq!(s, SubexpStatus::InvalidSpec);
    let s = unsafe { subexp_upper_expectation(ptr::null(), x.as_ptr(), 2, SubexpMethod::Auto, 0, &mut r, ptr::null_mut(), 0) };
    assert_eq!(s, SubexpStatus::NullPointer);
    unsafe { subexp_domain_free(d) };
    unsafe { subexp_domain_free(ptr::null_mut()) };
}

#[test]
fn membership_and_mu_bounds() {
    let d = domain(TWO_STATE);
    let mut inside = -1;
    let t = [0.3, 0.7];
    assert_eq!(unsafe { subexp_contains(d, t.as_ptr(), 2, 1e-9, &mut inside) }, SubexpStatus::Ok);
    assert_eq!(inside, 1);
    let t = [0.6, 0.4];
    unsafe { subexp_contains(d, t.as_ptr(), 2, 1e-9, &mut inside) };
    assert_eq!(inside, 0);
    let (mut lo, mut hi) = (0.0, 0.0);
    let x = [1.0, 0.0];
    assert_eq!(unsafe { subexp_mu_bounds(d, x.as_ptr(), 2, &mut lo, &mut hi) }, SubexpStatus::Ok);
    assert!((lo - 0.2).abs() < 1e-12 && (hi - 0.5).abs() < 1e-12);
    unsafe { subexp_domain_free(d) };
}

#[test]
fn expressions() {
    let src = CString::new("min(x, y) + sqrt(4)").unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { subexp_expr_parse(src.as_ptr(), &mut e) }, SubexpStatus::Ok);
    let mut v = 0.0;
    assert_eq!(unsafe { subexp_expr_eval(e, 1.5, -1.0, &mut v) }, SubexpStatus::Ok);
    assert_eq!(v, 1.0);
    unsafe { subexp_expr_free(e) };

    let src = CString::new("x + m").unwrap();
    assert_eq!(unsafe { subexp_expr_parse(src.as_ptr(), &mut e) }, SubexpStatus::Syntax);
    let src = CString::new("x +").unwrap();
    assert_eq!(unsafe { subexp_expr_parse(src.as_ptr(), &mut e) }, SubexpStatus::Syntax);
    assert!(e.is_null());
}

#[test]
fn independence_example() {
    let d = domain(r#"{"n_states": 2, "bounds": [{"lower": "1/3", "upper": "2/3"}]}"#);
    let phi = CString::new("(x - 0.5) * y * y").unwrap();
    let (x, y) = ([1.0, 0.0], [0.0, 1.0]);
    let mut r = zero();
    let s = unsafe { subexp_per_theta_independent(phi.as_ptr(), 0.5, 2.0, x.as_ptr(), y.as_ptr(), 2, d, 0, &mut r) };
    assert_eq!(s, SubexpStatus::Ok);
    assert!((r.value - 1.0 / 18.0).abs() < 1e-12);
    let s = unsafe { subexp_peng_independent(phi.as_ptr(), 0.5, 2.0, x.as_ptr(), y.as_ptr(), 2, d, 0, &mut r) };
    assert_eq!(s, SubexpStatus::Ok);
    assert!((r.value - 1.0 / 6.0).abs() < 1e-12);
    unsafe { subexp_domain_free(d) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(subexp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/subexp.h")).unwrap();
    for name in [
        "subexp_domain_from_json",
        "subexp_domain_free",
        "subexp_domain_n_states",
        "subexp_contains",
        "subexp_upper_expectation",
        "subexp_lower_expectation",
        "subexp_mu_bounds",
        "subexp_expr_parse",
        "subexp_expr_eval",
        "subexp_expr_free",
        "subexp_per_theta_independent",
        "subexp_peng_independent",
        "subexp_last_error_message",
        "subexp_version",
        "SUBEXP_STATUS_BUFFER_TOO_SMALL",
        "typedef struct SubexpDomain SubexpDomain",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which("cc") else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"subexp.h\"\nint main(void) { SubexpResult r; (void)r; return subexp_domain_n_states(0) == 0 ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which(cmd: &str) -> Result<std::path::PathBuf, ()> {
    std::env::var_os("PATH")
        .and_then(|p| std::env::split_paths(&p).map(|d| d.join(cmd)).find(|c| c.is_file()))
        .ok_or(())
}
