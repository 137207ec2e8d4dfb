use std::ffi::{CStr, CString};
use std::ptr;

use varinf_ffi::*;

fn last_error() -> String {
    let p = varinf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fixture(name: &str) -> *mut VarinfFamily {
    let name = CString::new(name).unwrap();
    let mut fam = ptr::null_mut();
    let st = unsafe { varinf_family_fixture(name.as_ptr(), &mut fam) };
    assert_eq!(st, VarinfStatus::Ok);
    assert!(!fam.is_null());
    fam
}

#[test]
fn parse_error_reports_position() {
    let text = CString::new("t1 := (abs 0)\nt2 := (abs\n").unwrap();
    let mut fam = ptr::null_mut();
    let st = unsafe { varinf_family_parse(text.as_ptr(), &mut fam) };
    assert_eq!(st, VarinfStatus::Parse);
    assert!(fam.is_null());
    let msg = last_error();
    assert!(msg.starts_with("2:"), "{msg}");
}

#[test]
fn null_arguments_are_rejected() {
    let mut fam = ptr::null_mut();
    assert_eq!(unsafe { varinf_family_parse(ptr::null(), &mut fam) }, VarinfStatus::NullPointer);
    assert!(last_error().contains("text"));

    let mut out = 0.0;
    let x = [0.0];
    let st = unsafe { varinf_upper_sum(ptr::null(), x.as_ptr(), 1, &mut out) };
    assert_eq!(st, VarinfStatus::NullPointer);

    let name = CString::new("abs-pair").unwrap();
    assert_eq!(
        unsafe { varinf_family_fixture(name.as_ptr(), ptr::null_mut()) },
        VarinfStatus::NullPointer
    );
    assert_eq!(unsafe { varinf_family_dim(ptr::null()) }, 0);
    unsafe {
        varinf_family_free(ptr::null_mut());
        varinf_string_free(ptr::null_mut());
    }
}

#[test]
fn unknown_fixture_is_an_error() {
    let name = CString::new("no-such-family").unwrap();
    let mut fam = ptr::null_mut();
    let st = unsafe { varinf_family_fixture(name.as_ptr(), &mut fam) };
    assert_ne!(st, VarinfStatus::Ok);
    assert!(fam.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn upper_sum_and_dimension() {
    let fam = fixture("abs-pair");
    assert_eq!(unsafe { varinf_family_dim(fam) }, 1);
    let mut out = f64::NAN;
    let x = [0.25];
    assert_eq!(unsafe { varinf_upper_sum(fam, x.as_ptr(), 1, &mut out) }, VarinfStatus::Ok);
    assert!((out - 1.0).abs() < 1e-12, "{out}");

    let y = [0.0, 0.0];
    assert_eq!(unsafe { varinf_upper_sum(fam, y.as_ptr(), 2, &mut out) }, VarinfStatus::Dimension);
    unsafe { varinf_family_free(fam) };
}

#[test]
fn lambda_diverges_on_reciprocal_pair() {
    let fam = fixture("example-2.1");
    let region = CString::new("[-2,2]").unwrap();
    let mut est = VarinfEstimate {
        value: 0.0,
        verdict: VarinfVerdict::Inconclusive,
        heuristic: true,
    };
    let st = unsafe { varinf_estimate(fam, VarinfQuantity::Lambda, region.as_ptr(), 7, &mut est) };
    assert_eq!(st, VarinfStatus::Ok);
    assert_eq!(est.verdict, VarinfVerdict::NegativeInfinityDiverging);
    assert_eq!(est.value, f64::NEG_INFINITY);

    let st = unsafe { varinf_estimate(fam, VarinfQuantity::Plain, ptr::null(), 7, &mut est) };
    assert_eq!(st, VarinfStatus::Ok);
    assert!((0.0..=1e-3).contains(&est.value), "{}", est.value);
    unsafe { varinf_family_free(fam) };
}

#[test]
fn bad_region_is_a_parse_error() {
    let fam = fixture("abs-pair");
    let region = CString::new("(box (0").unwrap();
    let mut est = VarinfEstimate {
        value: 0.0,
        verdict: VarinfVerdict::Inconclusive,
        heuristic: false,
    };
    let st = unsafe { varinf_estimate(fam, VarinfQuantity::Plain, region.as_ptr(), 0, &mut est) };
    assert_eq!(st, VarinfStatus::Parse);
    unsafe { varinf_family_free(fam) };
}

#[test]
fn certify_by_name() {
    let fam = fixture("abs-twin");
    let prop = CString::new("uniform-lsc").unwrap();
    let mut v = VarinfCertVerdict::Inconclusive;
    let st = unsafe { varinf_certify(fam, prop.as_ptr(), ptr::null(), 3, &mut v) };
    assert_eq!(st, VarinfStatus::Ok);
    assert_eq!(v, VarinfCertVerdict::Holds);

    let bogus = CString::new("very-lsc").unwrap();
    let st = unsafe { varinf_certify(fam, bogus.as_ptr(), ptr::null(), 3, &mut v) };
    assert_eq!(st, VarinfStatus::InvalidArgument);
    assert!(last_error().contains("very-lsc"));
    unsafe { varinf_family_free(fam) };
}

#[test]
fn errors_are_per_thread() {
    let mut fam = ptr::null_mut();
    assert_eq!(unsafe { varinf_family_parse(ptr::null(), &mut fam) }, VarinfStatus::NullPointer);
    let other = std::thread::spawn(|| varinf_last_error().is_null()).join().unwrap();
    assert!(other);
}
