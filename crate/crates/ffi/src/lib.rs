//! C interface to the adafw toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_new` functions
//! and released by the matching `*_free`. Every fallible call returns an
//! [`AdafwStatus`]; after a failure `adafw_last_error` describes it.
//! Vectors are passed as a pointer plus a length that must equal the
//! dimension of the handle they are used with.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use adafw::bench::data::parse_libsvm;
use adafw::optimizers::{self, duality_gap, OptimizerConfig, OptimizerTrace};
use adafw::{Dataset, Error, FeasibleRegion, FiniteSumObjective, Loss, Norm, RegionKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdafwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Infeasible = 4,
    Unsupported = 5,
    NotSeparable = 6,
    Parse = 7,
    Io = 8,
    NonFinite = 9,
    InvariantViolation = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdafwRegionKind {
    L1Ball = 0,
    LinfBall = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdafwLoss {
    SquaredHinge = 0,
    SquaredError = 1,
    Logistic = 2,
    SigmoidNonconvex = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdafwNorm {
    L1 = 0,
    L2 = 1,
    Linf = 2,
}

/// One trace row.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AdafwTraceRecord {
    pub t: u64,
    pub epoch: f64,
    pub objective: f64,
    pub duality_gap: f64,
    pub seconds: f64,
    pub grad_evals: u64,
    pub batch_size: u64,
}

pub struct AdafwRegion(FeasibleRegion);

pub struct AdafwObjective(FiniteSumObjective);

pub struct AdafwTrace(OptimizerTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AdafwStatus {
    match e {
        Error::DimensionMismatch { .. } => AdafwStatus::DimensionMismatch,
        Error::NonFinite(_) => AdafwStatus::NonFinite,
        Error::InvalidParameter(_) | Error::EmptyBatch | Error::IndexOutOfRange { .. } | Error::Spec(_) => {
            AdafwStatus::InvalidArgument
        }
        Error::NotSeparable(_) => AdafwStatus::NotSeparable,
        Error::MissingState(_) | Error::InvariantViolation(_) => AdafwStatus::InvariantViolation,
        Error::UnsupportedRegion(_) => AdafwStatus::Unsupported,
        Error::Infeasible => AdafwStatus::Infeasible,
        Error::Parse { .. } | Error::Json(_) => AdafwStatus::Parse,
        Error::Io(_) => AdafwStatus::Io,
    }
}

struct Failure(AdafwStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `body`, converting errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(body: F) -> AdafwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AdafwStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic inside adafw".into());
            AdafwStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AdafwStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AdafwStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn check_len(expected: usize, got: usize) -> Result<(), Failure> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

fn loss_of(loss: AdafwLoss) -> Loss {
    match loss {
        AdafwLoss::SquaredHinge => Loss::SquaredHinge,
        AdafwLoss::SquaredError => Loss::SquaredError,
        AdafwLoss::Logistic => Loss::Logistic,
        AdafwLoss::SigmoidNonconvex => Loss::SigmoidNonconvex,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn adafw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn adafw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a norm ball. `center` may be NULL for the origin.
///
/// # Safety
/// `center` must be NULL or point to `n` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_region_new(
    kind: AdafwRegionKind,
    center: *const f64,
    n: usize,
    radius: f64,
    out: *mut *mut AdafwRegion,
) -> AdafwStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let center = if center.is_null() {
            vec![0.0; n]
        } else {
            slice(center, n, "center")?.to_vec()
        };
        let kind = match kind {
            AdafwRegionKind::L1Ball => RegionKind::L1Ball,
            AdafwRegionKind::LinfBall => RegionKind::LinfBall,
        };
        let region = FeasibleRegion::new(kind, center, radius)?;
        *out = Box::into_raw(Box::new(AdafwRegion(region)));
        Ok(())
    })
}

/// # Safety
/// `region` must be NULL or a handle from `adafw_region_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn adafw_region_free(region: *mut AdafwRegion) {
    if !region.is_null() {
        drop(Box::from_raw(region));
    }
}

/// Dimension of the region, 0 for NULL.
///
/// # Safety
/// `region` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adafw_region_dim(region: *const AdafwRegion) -> usize {
    region.as_ref().map_or(0, |r| r.0.dim())
}

/// Writes `argmin_{v ∈ C} ⟨g, v⟩` into `out`.
///
/// # Safety
/// `g` and `out` must point to `n` doubles each; `region` must be live.
#[no_mangle]
pub unsafe extern "C" fn adafw_region_lmo(
    region: *const AdafwRegion,
    g: *const f64,
    n: usize,
    out: *mut f64,
) -> AdafwStatus {
    guard(|| {
        let region = &handle(region, "region")?.0;
        check_len(region.dim(), n)?;
        let v = region.lmo(slice(g, n, "g")?)?;
        slice_mut(out, n, "out")?.copy_from_slice(&v);
        Ok(())
    })
}

/// # Safety
/// `x` must point to `n` doubles; `inside` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_region_contains(
    region: *const AdafwRegion,
    x: *const f64,
    n: usize,
    tol: f64,
    inside: *mut bool,
) -> AdafwStatus {
    guard(|| {
        let region = &handle(region, "region")?.0;
        let inside = out_ptr(inside, "inside")?;
        *inside = region.contains(slice(x, n, "x")?, tol)?;
        Ok(())
    })
}

/// # Safety
/// `region` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_region_diameter(
    region: *const AdafwRegion,
    norm: AdafwNorm,
    out: *mut f64,
) -> AdafwStatus {
    guard(|| {
        let region = &handle(region, "region")?.0;
        let norm = match norm {
            AdafwNorm::L1 => Norm::L1,
            AdafwNorm::L2 => Norm::L2,
            AdafwNorm::Linf => Norm::Linf,
        };
        *out_ptr(out, "out")? = region.diameter(norm);
        Ok(())
    })
}

/// Projection of `z` onto the region in the metric `Σ h_i d_i²`.
///
/// # Safety
/// `z`, `h` and `out` must point to `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn adafw_region_metric_projection(
    region: *const AdafwRegion,
    z: *const f64,
    h: *const f64,
    n: usize,
    out: *mut f64,
) -> AdafwStatus {
    guard(|| {
        let region = &handle(region, "region")?.0;
        check_len(region.dim(), n)?;
        let p = region.metric_projection(slice(z, n, "z")?, slice(h, n, "h")?)?;
        slice_mut(out, n, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Objective over a dense row-major `m × n` matrix.
///
/// # Safety
/// `rows` must point to `m·n` doubles, `labels` to `m`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_objective_new_dense(
    loss: AdafwLoss,
    rows: *const f64,
    labels: *const f64,
    m: usize,
    n: usize,
    separable: bool,
    out: *mut *mut AdafwObjective,
) -> AdafwStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let total = m
            .checked_mul(n)
            .ok_or_else(|| Failure(AdafwStatus::InvalidArgument, "m·n overflows".into()))?;
        let flat = slice(rows, total, "rows")?;
        let rows: Vec<Vec<f64>> = if n == 0 {
            vec![Vec::new(); m]
        } else {
            flat.chunks(n).map(<[f64]>::to_vec).collect()
        };
        let data = Dataset::dense(rows, slice(labels, m, "labels")?.to_vec())?;
        let obj = FiniteSumObjective::new(loss_of(loss), data)?.with_separable(separable);
        *out = Box::into_raw(Box::new(AdafwObjective(obj)));
        Ok(())
    })
}

/// Objective over a LIBSVM file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_objective_from_libsvm(
    loss: AdafwLoss,
    path: *const c_char,
    out: *mut *mut AdafwObjective,
) -> AdafwStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = parse_libsvm(Path::new(string(path, "path")?))?;
        let obj = FiniteSumObjective::new(loss_of(loss), data)?;
        *out = Box::into_raw(Box::new(AdafwObjective(obj)));
        Ok(())
    })
}

/// # Safety
/// `obj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adafw_objective_free(obj: *mut AdafwObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// # Safety
/// `obj` must be live; `m` and `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_objective_dims(obj: *const AdafwObjective, m: *mut usize, n: *mut usize) -> AdafwStatus {
    guard(|| {
        let obj = &handle(obj, "objective")?.0;
        *out_ptr(m, "m")? = obj.m();
        *out_ptr(n, "n")? = obj.n();
        Ok(())
    })
}

/// # Safety
/// `x` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_objective_value(
    obj: *const AdafwObjective,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> AdafwStatus {
    guard(|| {
        let obj = &handle(obj, "objective")?.0;
        *out_ptr(out, "out")? = obj.value(slice(x, n, "x")?)?;
        Ok(())
    })
}

/// # Safety
/// `x` and `out` must point to `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn adafw_objective_gradient(
    obj: *const AdafwObjective,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> AdafwStatus {
    guard(|| {
        let obj = &handle(obj, "objective")?.0;
        let g = obj.full_gradient(slice(x, n, "x")?)?;
        slice_mut(out, n, "out")?.copy_from_slice(&g);
        Ok(())
    })
}

/// Frank-Wolfe duality gap at a feasible `x`.
///
/// # Safety
/// `x` must point to `n` doubles; handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_duality_gap(
    obj: *const AdafwObjective,
    region: *const AdafwRegion,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> AdafwStatus {
    guard(|| {
        let obj = &handle(obj, "objective")?.0;
        let region = &handle(region, "region")?.0;
        *out_ptr(out, "out")? = duality_gap(obj, region, slice(x, n, "x")?)?;
        Ok(())
    })
}

/// Runs an optimizer described by a JSON config such as
/// `{"algorithm": "adacsfw", "inner_steps": 2}`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; handles must be live;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_run(
    obj: *const AdafwObjective,
    region: *const AdafwRegion,
    config_json: *const c_char,
    out: *mut *mut AdafwTrace,
) -> AdafwStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let obj = &handle(obj, "objective")?.0;
        let region = &handle(region, "region")?.0;
        let config: OptimizerConfig = serde_json::from_str(string(config_json, "config_json")?).map_err(Error::from)?;
        let trace = optimizers::run(obj, region, &config)?;
        *out = Box::into_raw(Box::new(AdafwTrace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adafw_trace_free(trace: *mut AdafwTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of records, 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adafw_trace_len(trace: *const AdafwTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `trace` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adafw_trace_record(
    trace: *const AdafwTrace,
    index: usize,
    out: *mut AdafwTraceRecord,
) -> AdafwStatus {
    guard(|| {
        let records = &handle(trace, "trace")?.0.records;
        let r = records.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: records.len(),
        })?;
        *out_ptr(out, "out")? = AdafwTraceRecord {
            t: r.t as u64,
            epoch: r.epoch,
            objective: r.objective,
            duality_gap: r.duality_gap,
            seconds: r.seconds,
            grad_evals: r.grad_evals,
            batch_size: r.batch_size as u64,
        };
        Ok(())
    })
}

/// Copies the last iterate into `out`.
///
/// # Safety
/// `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn adafw_trace_final_point(trace: *const AdafwTrace, out: *mut f64, n: usize) -> AdafwStatus {
    guard(|| {
        let x = &handle(trace, "trace")?.0.final_point;
        check_len(x.len(), n)?;
        slice_mut(out, n, "out")?.copy_from_slice(x);
        Ok(())
    })
}

/// Writes the trace as CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `trace` must be live.
#[no_mangle]
pub unsafe extern "C" fn adafw_trace_write_csv(trace: *const AdafwTrace, path: *const c_char) -> AdafwStatus {
    guard(|| {
        let trace = &handle(trace, "trace")?.0;
        trace.write_csv_file(Path::new(string(path, "path")?))?;
        Ok(())
    })
}
