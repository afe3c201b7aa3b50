//! C ABI over `ncbasis`.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`NcStatus`];
//! on failure [`nc_last_error_message`] describes what went wrong on the
//! calling thread.
//!
//! Matrices cross the boundary as interleaved `(re, im)` doubles in row-major
//! order, so an `n × n` matrix occupies `2 n²` doubles. The exponent `p` is a
//! double and `INFINITY` selects the operator norm.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ncbasis::normlab::{certify, theoretical_bound, CertifyOptions, EstimationStrategy, NormReport};
use ncbasis::{
    Alpha, Error, Exponent, HaarSystem, NormSide, NormSpec, Side, SquareMatrix, Weight, C64,
};

/// Status codes; the numeric values match the CLI exit codes where they
/// overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    CertificationFailed = 3,
    NumericFailure = 4,
    BufferSize = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcSide {
    Left = 0,
    Right = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcNormSide {
    Plain = 0,
    Left = 1,
    Right = 2,
}

/// Estimation effort for [`nc_certify`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NcStrategy {
    pub samples: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

/// Opaque Haar system.
pub struct NcHaarSystem {
    inner: HaarSystem,
}

/// Opaque certification report.
pub struct NcReport {
    inner: NormReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NcStatus {
    match err {
        Error::NumericFailure(_) => NcStatus::NumericFailure,
        Error::Io(_) => NcStatus::Io,
        _ => NcStatus::Domain,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NcStatus, String)>) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside ncbasis".into());
            NcStatus::Panic
        }
    }
}

fn lib<T>(r: ncbasis::Result<T>) -> Result<T, (NcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (NcStatus, String) {
    (NcStatus::NullPointer, format!("{name} is null"))
}

fn exponent(p: f64) -> Result<Exponent, (NcStatus, String)> {
    if p == f64::INFINITY {
        Ok(Exponent::Infinity)
    } else {
        lib(Exponent::new(p))
    }
}

fn norm_side(side: NcNormSide) -> NormSide {
    match side {
        NcNormSide::Plain => NormSide::Plain,
        NcNormSide::Left => NormSide::Left,
        NcNormSide::Right => NormSide::Right,
    }
}

/// # Safety
/// `data` must point to `2 dim²` readable doubles.
unsafe fn read_matrix(dim: usize, data: *const f64) -> Result<SquareMatrix, (NcStatus, String)> {
    if data.is_null() {
        return Err(null("data"));
    }
    if dim == 0 || dim > ncbasis::matrix::MAX_DIM {
        return Err((NcStatus::Domain, format!("invalid dimension {dim}")));
    }
    let raw = std::slice::from_raw_parts(data, 2 * dim * dim);
    let entries = raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
    lib(SquareMatrix::from_vec(dim, entries))
}

/// # Safety
/// `out` must point to `out_len` writable doubles.
unsafe fn write_complex(values: &[C64], out: *mut f64, out_len: usize) -> Result<(), (NcStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if out_len < 2 * values.len() {
        return Err((
            NcStatus::BufferSize,
            format!("output buffer holds {out_len} doubles, need {}", 2 * values.len()),
        ));
    }
    let dst = std::slice::from_raw_parts_mut(out, 2 * values.len());
    for (pair, z) in dst.chunks_exact_mut(2).zip(values) {
        pair[0] = z.re;
        pair[1] = z.im;
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Standard Haar system for `alpha = num/den` (exact) at the given level.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_new(
    num: u64,
    den: u64,
    level: usize,
    side: NcSide,
    out: *mut *mut NcHaarSystem,
) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let alpha = lib(Alpha::from_ratio(num, den))?;
        let side = match side {
            NcSide::Left => Side::Left,
            NcSide::Right => Side::Right,
        };
        let inner = lib(HaarSystem::standard(alpha, level, side))?;
        *out = Box::into_raw(Box::new(NcHaarSystem { inner }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`nc_haar_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_free(h: *mut NcHaarSystem) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of elements, 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_len(h: *const NcHaarSystem) -> usize {
    h.as_ref().map_or(0, |h| h.inner.len())
}

/// Matrix dimension `2^level`, 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_dim(h: *const NcHaarSystem) -> usize {
    h.as_ref().map_or(0, |h| h.inner.dim())
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_gram_residual(h: *const NcHaarSystem, out: *mut f64) -> NcStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = h.inner.gram_residual();
        Ok(())
    })
}

/// Coefficients of `x` (dim × dim) into `coeffs` (`2 len` doubles).
///
/// # Safety
/// `x` holds `2 dim²` doubles and `coeffs` has room for `coeffs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_analyze(
    h: *const NcHaarSystem,
    x: *const f64,
    coeffs: *mut f64,
    coeffs_len: usize,
) -> NcStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("system"))?;
        let x = read_matrix(h.inner.dim(), x)?;
        let c = lib(h.inner.analyze(&x))?;
        write_complex(&c, coeffs, coeffs_len)
    })
}

/// `Σ c_j h_j` from `2 len` doubles into `out` (`2 dim²` doubles).
///
/// # Safety
/// `coeffs` holds `2 len` doubles and `out` has room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_synthesize(
    h: *const NcHaarSystem,
    coeffs: *const f64,
    out: *mut f64,
    out_len: usize,
) -> NcStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("system"))?;
        if coeffs.is_null() {
            return Err(null("coeffs"));
        }
        let raw = std::slice::from_raw_parts(coeffs, 2 * h.inner.len());
        let c: Vec<C64> = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        let x = lib(h.inner.synthesize(&c))?;
        write_complex(x.as_slice(), out, out_len)
    })
}

/// Inductive bound of the system at its top level.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nc_haar_theoretical_bound(
    h: *const NcHaarSystem,
    p: f64,
    out: *mut f64,
) -> NcStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let b = lib(theoretical_bound(h.inner.quads(), exponent(p)?))?;
        *out = *b.last().expect("nonempty");
        Ok(())
    })
}

/// Plain Schatten-p norm.
///
/// # Safety
/// `x` holds `2 dim²` doubles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nc_schatten_norm(dim: usize, x: *const f64, p: f64, out: *mut f64) -> NcStatus {
    guard(|| {
        let x = read_matrix(dim, x)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(ncbasis::matrix::schatten_norm(&x, exponent(p)?))?;
        Ok(())
    })
}

/// Norm of `x` weighted by `A_ν` for `alpha = num/den`, `ν = log2 dim`.
///
/// # Safety
/// `x` holds `2 dim²` doubles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nc_weighted_norm(
    dim: usize,
    x: *const f64,
    num: u64,
    den: u64,
    p: f64,
    side: NcNormSide,
    out: *mut f64,
) -> NcStatus {
    guard(|| {
        let x = read_matrix(dim, x)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !dim.is_power_of_two() || dim < 2 {
            return Err((NcStatus::Domain, format!("dimension {dim} is not 2^ν with ν ≥ 1")));
        }
        let w = lib(Weight::new(lib(Alpha::from_ratio(num, den))?, dim.trailing_zeros() as usize))?;
        let spec = NormSpec::new(exponent(p)?, norm_side(side));
        *out = lib(ncbasis::matrix::weighted_norm(&x, w.density(), spec))?;
        Ok(())
    })
}

/// Default estimation effort with the given seed.
#[no_mangle]
pub extern "C" fn nc_strategy_default(seed: u64) -> NcStrategy {
    let d = EstimationStrategy::default();
    NcStrategy {
        samples: d.samples,
        restarts: d.restarts,
        iterations: d.iterations,
        seed,
    }
}

/// Certifies all scheduled partial sums. Returns `Ok` with a report even when
/// some rows fail; query [`nc_report_passed`].
///
/// # Safety
/// `h` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn nc_certify(
    h: *const NcHaarSystem,
    p: f64,
    side: NcNormSide,
    strategy: NcStrategy,
    out: *mut *mut NcReport,
) -> NcStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let strategy = EstimationStrategy {
            samples: strategy.samples,
            restarts: strategy.restarts,
            iterations: strategy.iterations,
            grid_oracle: false,
            seed: strategy.seed,
        };
        let spec = NormSpec::new(exponent(p)?, norm_side(side));
        let inner = lib(certify(&h.inner, spec, &strategy, &CertifyOptions::default()))?;
        *out = Box::into_raw(Box::new(NcReport { inner }));
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`nc_certify`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nc_report_free(r: *mut NcReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// 1 when every row passes, 0 otherwise or for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_report_passed(r: *const NcReport) -> i32 {
    r.as_ref().map_or(0, |r| r.inner.passed() as i32)
}

/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_report_rows(r: *const NcReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.rows.len())
}

/// Largest estimate in the report, NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_report_max_estimate(r: *const NcReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.inner.max_estimate())
}

/// CSV rendering; release with [`nc_string_free`].
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn nc_report_csv(r: *const NcReport, out: *mut *mut c_char) -> NcStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = lib(r.inner.to_csv_string())?;
        *out = CString::new(s).expect("csv has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
