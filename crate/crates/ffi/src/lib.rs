//! C ABI over `dctmars`.
//!
//! Every fallible function returns a [`DmStatus`]. On failure the message is
//! kept per thread and can be read with [`dm_last_error_message`]. Arrays are
//! passed as caller-owned buffers; fields are row-major `rows x cols`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dctmars::dct::{dct2_forward, dct2_inverse, CoeffSelection, Reconstructor, SpatialField};
use dctmars::snapshot::ModelSnapshot;
use dctmars::Error;
use nalgebra::DMatrix;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    Panic = 6,
}

/// Retained-coefficient window shape.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmShape {
    Square = 0,
    Triangle = 1,
}

/// Opaque fitted emulator loaded from a snapshot file.
pub struct DmModel {
    snapshot: ModelSnapshot,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DmStatus {
    match err {
        Error::Io { .. } => DmStatus::Io,
        Error::Parse { .. } | Error::Json(_) => DmStatus::Parse,
        Error::Degenerate(_) | Error::EmptyStore(_) => DmStatus::Numerical,
        _ => DmStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (DmStatus, String)>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_owned());
            DmStatus::Panic
        }
    }
}

fn lib(err: Error) -> (DmStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (DmStatus, String) {
    (DmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (DmStatus, String) {
    (DmStatus::InvalidArgument, msg.into())
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (DmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable values.
unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (DmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn selection(shape: DmShape, size: usize) -> CoeffSelection {
    match shape {
        DmShape::Square => CoeffSelection::Square(size),
        DmShape::Triangle => CoeffSelection::Triangle(size),
    }
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of retained coefficients for a selection.
#[no_mangle]
pub extern "C" fn dm_selection_len(shape: DmShape, size: usize) -> usize {
    selection(shape, size).len()
}

/// Orthonormal 2-D DCT-II of a row-major field into a row-major
/// `rows x cols` coefficient buffer.
///
/// # Safety
/// `field` and `coeffs_out` must each hold `rows * cols` values.
#[no_mangle]
pub unsafe extern "C" fn dm_dct2_forward(
    field: *const f64,
    rows: usize,
    cols: usize,
    coeffs_out: *mut f64,
) -> DmStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or_else(|| invalid("rows * cols overflows"))?;
        let values = input(field, n, "field")?.to_vec();
        let out = output(coeffs_out, n, "coeffs_out")?;
        let coeffs = dct2_forward(&SpatialField::new(rows, cols, values).map_err(lib)?);
        for r in 0..rows {
            for c in 0..cols {
                out[r * cols + c] = coeffs[(r, c)];
            }
        }
        Ok(())
    })
}

/// Inverse of [`dm_dct2_forward`].
///
/// # Safety
/// `coeffs` and `field_out` must each hold `rows * cols` values.
#[no_mangle]
pub unsafe extern "C" fn dm_dct2_inverse(
    coeffs: *const f64,
    rows: usize,
    cols: usize,
    field_out: *mut f64,
) -> DmStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or_else(|| invalid("rows * cols overflows"))?;
        if n == 0 {
            return Err(invalid("field dims must be positive"));
        }
        let values = input(coeffs, n, "coeffs")?;
        let out = output(field_out, n, "field_out")?;
        let m = DMatrix::from_row_slice(rows, cols, values);
        out.copy_from_slice(dct2_inverse(&m).map_err(lib)?.values());
        Ok(())
    })
}

/// Field from the retained coefficients `theta` (zig-zag order).
///
/// # Safety
/// `theta` must hold `dm_selection_len(shape, size)` values and `field_out`
/// `rows * cols` values.
#[no_mangle]
pub unsafe extern "C" fn dm_reconstruct(
    theta: *const f64,
    shape: DmShape,
    size: usize,
    rows: usize,
    cols: usize,
    field_out: *mut f64,
) -> DmStatus {
    guard(|| {
        let sel = selection(shape, size);
        let recon = Reconstructor::new(sel, (rows, cols)).map_err(lib)?;
        let theta = input(theta, sel.len(), "theta")?;
        let out = output(field_out, rows * cols, "field_out")?;
        out.copy_from_slice(&recon.field_values(theta));
        Ok(())
    })
}

/// Loads a snapshot written by `dctmars fit` or `dctmars calibrate`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer. On
/// success `*out` owns a model that must be released with [`dm_model_free`].
#[no_mangle]
pub unsafe extern "C" fn dm_model_load(path: *const c_char, out: *mut *mut DmModel) -> DmStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let snapshot = ModelSnapshot::load(Path::new(path)).map_err(lib)?;
        *out = Box::into_raw(Box::new(DmModel { snapshot }));
        Ok(())
    })
}

/// Releases a model. Null is accepted.
///
/// # Safety
/// `model` must be null or a pointer from [`dm_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_model_free(model: *mut DmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of raw inputs per prediction row (known inputs then coefficients).
///
/// # Safety
/// `model` must be null or a live model.
#[no_mangle]
pub unsafe extern "C" fn dm_model_n_inputs(model: *const DmModel) -> usize {
    model.as_ref().map_or(0, |m| m.snapshot.p())
}

/// Number of stored posterior draws.
///
/// # Safety
/// `model` must be null or a live model.
#[no_mangle]
pub unsafe extern "C" fn dm_model_n_draws(model: *const DmModel) -> usize {
    model.as_ref().map_or(0, |m| m.snapshot.draws.len())
}

/// Posterior mean and central interval of the emulator (transformed scale)
/// at `n_rows` row-major input rows of width [`dm_model_n_inputs`].
/// `lower_out` and `upper_out` may be null when only the mean is wanted.
///
/// # Safety
/// `x` must hold `n_rows * n_inputs` values; each non-null output buffer
/// `n_rows` values.
#[no_mangle]
pub unsafe extern "C" fn dm_model_predict(
    model: *const DmModel,
    x: *const f64,
    n_rows: usize,
    level: f64,
    mean_out: *mut f64,
    lower_out: *mut f64,
    upper_out: *mut f64,
) -> DmStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if !(level > 0.0 && level < 1.0) {
            return Err(invalid(format!("level must lie in (0, 1), got {level}")));
        }
        let p = model.snapshot.p();
        let x = input(x, n_rows * p, "x")?;
        let mean = output(mean_out, n_rows, "mean_out")?;
        let mut lower = (!lower_out.is_null()).then(|| std::slice::from_raw_parts_mut(lower_out, n_rows));
        let mut upper = (!upper_out.is_null()).then(|| std::slice::from_raw_parts_mut(upper_out, n_rows));
        let tail = 0.5 * (1.0 - level);
        for (i, row) in x.chunks_exact(p).enumerate() {
            let pred = model.snapshot.predict_raw(row, &[tail, 1.0 - tail]).map_err(lib)?;
            mean[i] = pred.mean;
            if let Some(l) = lower.as_deref_mut() {
                l[i] = pred.quantiles[0];
            }
            if let Some(u) = upper.as_deref_mut() {
                u[i] = pred.quantiles[1];
            }
        }
        Ok(())
    })
}
