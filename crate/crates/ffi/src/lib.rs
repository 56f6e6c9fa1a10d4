//! C interface to the `iilasso` solver.
//!
//! Objects are opaque handles created by `iil_*_new`/`iil_fit*` and released
//! with the matching `iil_*_free`. Every fallible call returns an
//! [`IilStatus`]; on failure, `iil_last_error_message` describes the most
//! recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use iilasso::data::SyntheticSpec;
use iilasso::report::{to_json_string, Schema};
use iilasso::similarity::{build_similarity, GroupPartition, PenaltySpec, SimilarityVariant, DEFAULT_CLAMP};
use iilasso::solver::{fit, fit_logistic, FitResult, LogisticFitResult, SolverConfig};
use iilasso::{Dataset, Error, Task};
use nalgebra::DMatrix;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IilStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidData = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IilTask {
    Regression = 0,
    Classification = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IilSimilarity {
    Squared = 0,
    Absolute = 1,
    Ratio = 2,
    Group = 3,
}

/// Opaque dataset handle.
pub struct IilDataset {
    inner: Dataset,
}

enum FitKind {
    Linear(FitResult),
    Logistic(LogisticFitResult),
}

/// Opaque fit handle.
pub struct IilFit {
    inner: FitKind,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(err: &Error) -> IilStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => IilStatus::DimensionMismatch,
        Error::ZeroVariance(_)
        | Error::InvalidLabel { .. }
        | Error::NotStandardized(_)
        | Error::TaskMismatch { .. } => IilStatus::InvalidData,
        Error::NonFinite { .. } => IilStatus::Numerical,
        _ => IilStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (IilStatus, String)>) -> IilStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IilStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IilStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (IilStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IilStatus, String) {
    (IilStatus::NullPointer, format!("{what} is null"))
}

/// Borrows `len` values from `data`, which must not be null unless `len` is 0.
unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], (IilStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iil_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iil_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `sgn(z)·max(|z| − gamma, 0)`. Returns NaN for negative or NaN `gamma`.
#[no_mangle]
pub extern "C" fn iil_soft_threshold(z: f64, gamma: f64) -> f64 {
    if gamma >= 0.0 {
        iilasso::soft_threshold(z, gamma)
    } else {
        f64::NAN
    }
}

/// Creates a dataset from a row-major `n × p` design `x` and response `y`.
///
/// # Safety
/// `x` must point to `n*p` doubles, `y` to `n` doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn iil_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    task: IilTask,
    standardize: bool,
    out: *mut *mut IilDataset,
) -> IilStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let len = n
            .checked_mul(p)
            .ok_or((IilStatus::InvalidArgument, "n*p overflows".into()))?;
        let xs = slice(x, len, "x")?;
        let ys = slice(y, n, "y")?;
        let task = match task {
            IilTask::Regression => Task::Regression,
            IilTask::Classification => Task::Classification,
        };
        let xm = DMatrix::from_row_slice(n, p, xs);
        let ds = if standardize {
            Dataset::standardized(xm, ys.to_vec(), task, None)
        } else {
            Dataset::from_raw(xm, ys.to_vec(), task, None)
        }
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IilDataset { inner: ds }));
        Ok(())
    })
}

/// Draws the block-correlated synthetic design (standardized). `coef`
/// holds `b` values; `beta_star_out`, when not null, receives the `p`
/// raw-scale true coefficients.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn iil_generate_synthetic(
    n: usize,
    b: usize,
    q: usize,
    rho: f64,
    coef: *const f64,
    noise_sd: f64,
    seed: u64,
    out: *mut *mut IilDataset,
    beta_star_out: *mut f64,
) -> IilStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let coef = slice(coef, b, "coef")?.to_vec();
        let spec = SyntheticSpec {
            n,
            p: b * q,
            b,
            q,
            rho,
            coef,
            noise_sd,
            seed,
        };
        let (ds, truth) = iilasso::generate_synthetic(&spec).map_err(lib_err)?;
        if !beta_star_out.is_null() {
            std::slice::from_raw_parts_mut(beta_star_out, spec.p).copy_from_slice(&truth.beta_star);
        }
        *out = Box::into_raw(Box::new(IilDataset { inner: ds }));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn iil_dataset_free(ds: *mut IilDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iil_dataset_n(ds: *const IilDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n())
}

/// Number of feature columns, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iil_dataset_p(ds: *const IilDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.p())
}

/// Fits at one `(lambda, alpha)`. `group_labels` (length `p`) is required
/// for `IIL_SIMILARITY_GROUP` and must be null otherwise. `tol <= 0` and
/// `max_sweeps == 0` select the defaults. The task of `ds` decides between
/// least squares and logistic regression. A fit that stops before
/// converging is still returned with status OK; query
/// `iil_fit_converged`.
///
/// # Safety
/// `ds` must be a live handle, `group_labels` null or valid for `p`
/// entries and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iil_fit(
    ds: *const IilDataset,
    lambda: f64,
    alpha: f64,
    similarity: IilSimilarity,
    group_labels: *const usize,
    tol: f64,
    max_sweeps: usize,
    out: *mut *mut IilFit,
) -> IilStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let ds = &ds.as_ref().ok_or_else(|| null("dataset"))?.inner;
        let variant = match similarity {
            IilSimilarity::Squared => SimilarityVariant::Squared,
            IilSimilarity::Absolute => SimilarityVariant::Absolute,
            IilSimilarity::Ratio => SimilarityVariant::Ratio,
            IilSimilarity::Group => SimilarityVariant::GroupIndicator,
        };
        let partition = if group_labels.is_null() {
            None
        } else {
            Some(GroupPartition::from_labels(slice(group_labels, ds.p(), "group_labels")?).map_err(lib_err)?)
        };
        let sim = build_similarity(ds, variant, DEFAULT_CLAMP, partition.as_ref()).map_err(lib_err)?;
        let pen = PenaltySpec::new(lambda, alpha, Arc::new(sim)).map_err(lib_err)?;
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            tol: if tol > 0.0 { tol } else { d.tol },
            max_sweeps: if max_sweeps > 0 { max_sweeps } else { d.max_sweeps },
            ..d
        };
        let inner = match ds.task() {
            Task::Regression => FitKind::Linear(fit(ds, &pen, &cfg, None).map_err(lib_err)?),
            Task::Classification => FitKind::Logistic(fit_logistic(ds, &pen, &cfg).map_err(lib_err)?),
        };
        *out = Box::into_raw(Box::new(IilFit { inner }));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn iil_fit_free(fit: *mut IilFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

impl IilFit {
    fn beta(&self) -> &[f64] {
        match &self.inner {
            FitKind::Linear(f) => &f.beta,
            FitKind::Logistic(f) => &f.beta,
        }
    }
}

/// Copies the standardized-scale coefficients into `out` (capacity `len`).
/// Fails with `BUFFER_TOO_SMALL` when `len < p`.
///
/// # Safety
/// `fit` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn iil_fit_beta(fit: *const IilFit, out: *mut f64, len: usize) -> IilStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let beta = f.beta();
        if len < beta.len() {
            return Err((
                IilStatus::BufferTooSmall,
                format!("buffer holds {len}, need {}", beta.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, beta.len()).copy_from_slice(beta);
        Ok(())
    })
}

/// Intercept (0 for least squares, NaN for a null handle).
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iil_fit_intercept(fit: *const IilFit) -> f64 {
    match fit.as_ref().map(|f| &f.inner) {
        Some(FitKind::Linear(_)) => 0.0,
        Some(FitKind::Logistic(f)) => f.intercept,
        None => f64::NAN,
    }
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iil_fit_converged(fit: *const IilFit) -> bool {
    match fit.as_ref().map(|f| &f.inner) {
        Some(FitKind::Linear(f)) => f.converged,
        Some(FitKind::Logistic(f)) => f.converged,
        None => false,
    }
}

/// Largest stationarity violation at the returned coefficients.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iil_fit_kkt_residual(fit: *const IilFit) -> f64 {
    match fit.as_ref().map(|f| &f.inner) {
        Some(FitKind::Linear(f)) => f.kkt_residual,
        Some(FitKind::Logistic(f)) => f.kkt_residual,
        None => f64::NAN,
    }
}

/// Penalized objective at the returned coefficients.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iil_fit_objective(fit: *const IilFit) -> f64 {
    match fit.as_ref().map(|f| &f.inner) {
        Some(FitKind::Linear(f)) => f.objective,
        Some(FitKind::Logistic(f)) => f.objective,
        None => f64::NAN,
    }
}

/// Serializes the fit as versioned JSON. Release the string with
/// `iil_string_free`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iil_fit_to_json(fit: *const IilFit, out: *mut *mut c_char) -> IilStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let text = match &f.inner {
            FitKind::Linear(r) => to_json_string(Schema::Fit, r),
            FitKind::Logistic(r) => to_json_string(Schema::LogisticFit, r),
        }
        .map_err(lib_err)?;
        *out = CString::new(text)
            .map_err(|e| (IilStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from `iil_fit_to_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn iil_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
