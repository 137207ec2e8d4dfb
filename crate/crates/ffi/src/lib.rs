//! C ABI for the varinf toolkit.
//!
//! Families live behind an opaque [`VarinfFamily`] handle. Every call returns
//! a [`VarinfStatus`]; on anything but `VARINF_STATUS_OK` the message is
//! available from [`varinf_last_error`] on the same thread. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use varinf::certify::{CertVerdict, Certifier, CertifyConfig, Property};
use varinf::decouple::{Analyzer, DecoupleConfig, Estimate, Verdict};
use varinf::functions::{parse_family, parse_region, FunctionFamily};
use varinf::{Error, Region};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarinfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Dimension = 5,
    Computation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarinfVerdict {
    Converged = 0,
    NegativeInfinityDiverging = 1,
    PositiveInfinityDiverging = 2,
    Inconclusive = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarinfCertVerdict {
    Holds = 0,
    Fails = 1,
    Inconclusive = 2,
}

/// A parsed function family.
pub struct VarinfFamily {
    family: FunctionFamily,
}

/// The quantity computed by [`varinf_estimate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarinfQuantity {
    Plain = 0,
    Lambda = 1,
    Theta = 2,
    Delta = 3,
    QuasiLambda = 4,
    QuasiTheta = 5,
    QuasiDelta = 6,
}

/// Value and verdict of an estimate. Infinite values are `±INFINITY`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct VarinfEstimate {
    pub value: f64,
    pub verdict: VarinfVerdict,
    /// Nonzero when some member needed an unbounded search.
    pub heuristic: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VarinfStatus {
    match e {
        Error::Parse { .. } => VarinfStatus::Parse,
        Error::Dimension { .. } => VarinfStatus::Dimension,
        Error::InvalidParameter(_) | Error::NonFiniteCoordinate | Error::Empty(_) | Error::NotInDomain => {
            VarinfStatus::InvalidArgument
        }
        _ => VarinfStatus::Computation,
    }
}

struct Fail(VarinfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let msg = match &e {
            Error::Parse { line, column, message } => format!("{line}:{column}: {message}"),
            other => other.to_string(),
        };
        Fail(status_of(&e), msg)
    }
}

/// Runs `f`, recording any error or panic for [`varinf_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VarinfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VarinfStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            VarinfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(VarinfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(VarinfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn family_arg<'a>(p: *const VarinfFamily) -> Result<&'a FunctionFamily, Fail> {
    p.as_ref()
        .map(|h| &h.family)
        .ok_or_else(|| Fail(VarinfStatus::NullPointer, "family handle is null".into()))
}

unsafe fn region_arg(fam: &FunctionFamily, p: *const c_char) -> Result<Region, Fail> {
    if p.is_null() {
        return fam
            .region()
            .cloned()
            .ok_or_else(|| Fail(VarinfStatus::InvalidArgument, "family has no region; pass one".into()));
    }
    Ok(parse_region(str_arg(p, "region")?)?)
}

fn out_null(what: &str) -> Fail {
    Fail(VarinfStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn varinf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a family in the `.fam` text format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varinf_family_parse(text: *const c_char, out: *mut *mut VarinfFamily) -> VarinfStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        if out.is_null() {
            return Err(out_null("out"));
        }
        let family = parse_family(text)?;
        *out = Box::into_raw(Box::new(VarinfFamily { family }));
        Ok(())
    })
}

/// Loads a built-in fixture by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varinf_family_fixture(name: *const c_char, out: *mut *mut VarinfFamily) -> VarinfStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        if out.is_null() {
            return Err(out_null("out"));
        }
        let family = varinf::corpus::fixture(name)?;
        *out = Box::into_raw(Box::new(VarinfFamily { family }));
        Ok(())
    })
}

/// # Safety
/// `family` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn varinf_family_free(family: *mut VarinfFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Dimension of the family's domain, 0 for a null handle.
///
/// # Safety
/// `family` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn varinf_family_dim(family: *const VarinfFamily) -> usize {
    family.as_ref().map_or(0, |h| h.family.dim())
}

/// Upper sum at `x` (`n` coordinates).
///
/// # Safety
/// `x` must point to `n` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn varinf_upper_sum(
    family: *const VarinfFamily,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> VarinfStatus {
    guard(|| {
        let fam = family_arg(family)?;
        if x.is_null() {
            return Err(out_null("x"));
        }
        if out.is_null() {
            return Err(out_null("out"));
        }
        let x = std::slice::from_raw_parts(x, n);
        *out = fam.upper_sum(x)?.value.value();
        Ok(())
    })
}

fn run_estimate(an: &Analyzer, q: VarinfQuantity) -> varinf::Result<Estimate> {
    match q {
        VarinfQuantity::Plain => Ok(an.plain()),
        VarinfQuantity::Lambda => an.lambda(),
        VarinfQuantity::Theta => Ok(an.theta()),
        VarinfQuantity::Delta => an.delta(),
        VarinfQuantity::QuasiLambda => an.quasi_lambda(),
        VarinfQuantity::QuasiTheta => an.quasi_theta(),
        VarinfQuantity::QuasiDelta => an.quasi_delta(),
    }
}

fn verdict(v: Verdict) -> VarinfVerdict {
    match v {
        Verdict::Converged => VarinfVerdict::Converged,
        Verdict::NegativeInfinityDiverging => VarinfVerdict::NegativeInfinityDiverging,
        Verdict::PositiveInfinityDiverging => VarinfVerdict::PositiveInfinityDiverging,
        Verdict::Inconclusive => VarinfVerdict::Inconclusive,
    }
}

/// Estimates one quantity over `region` (an s-expression or `[a,b]`; null
/// for the family's own region).
///
/// # Safety
/// `region` must be null or a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varinf_estimate(
    family: *const VarinfFamily,
    quantity: VarinfQuantity,
    region: *const c_char,
    seed: u64,
    out: *mut VarinfEstimate,
) -> VarinfStatus {
    guard(|| {
        let fam = family_arg(family)?;
        if out.is_null() {
            return Err(out_null("out"));
        }
        let cfg = DecoupleConfig::new(region_arg(fam, region)?).with_seed(seed);
        let an = Analyzer::new(fam, &cfg)?;
        let e = run_estimate(&an, quantity)?;
        *out = VarinfEstimate {
            value: e.value.value(),
            verdict: verdict(e.verdict),
            heuristic: e.heuristic,
        };
        Ok(())
    })
}

/// Certifies a property given by name, e.g. `"uniform-lsc"`. `joint-lsc`
/// and `inf-compact` are not available here.
///
/// # Safety
/// `property` must be a NUL-terminated string, `region` null or one, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varinf_certify(
    family: *const VarinfFamily,
    property: *const c_char,
    region: *const c_char,
    seed: u64,
    out: *mut VarinfCertVerdict,
) -> VarinfStatus {
    guard(|| {
        let fam = family_arg(family)?;
        let name = str_arg(property, "property")?;
        if out.is_null() {
            return Err(out_null("out"));
        }
        let prop = Property::parse(name)
            .ok_or_else(|| Fail(VarinfStatus::InvalidArgument, format!("unknown property '{name}'")))?;
        let mut cfg = CertifyConfig::new(region_arg(fam, region)?);
        cfg.decouple.seed = seed;
        let cert = Certifier::new(fam, &cfg)?.certify(prop)?;
        *out = match cert.verdict {
            CertVerdict::Holds => VarinfCertVerdict::Holds,
            CertVerdict::Fails { .. } => VarinfCertVerdict::Fails,
            CertVerdict::Inconclusive => VarinfCertVerdict::Inconclusive,
        };
        Ok(())
    })
}

/// Runs the regression corpus with `seed` and returns the JSON report in
/// `*out`, to be released with [`varinf_string_free`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varinf_corpus_json(seed: u64, out: *mut *mut c_char) -> VarinfStatus {
    guard(|| {
        if out.is_null() {
            return Err(out_null("out"));
        }
        let r = varinf::corpus::run_corpus(&[], seed)?;
        let s = serde_json::to_string(&r).map_err(|e| Fail(VarinfStatus::Computation, e.to_string()))?;
        *out = CString::new(s)
            .map_err(|e| Fail(VarinfStatus::Computation, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn varinf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
