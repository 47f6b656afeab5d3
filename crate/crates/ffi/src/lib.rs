//! C interface to driftlab.
//!
//! Every fallible function returns a `DlStatus`; on failure a message is
//! available from `dl_last_error_message` on the same thread. Handles are
//! opaque and must be released with their `_free` function. Matrices are
//! row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use driftlab::align::{procrustes, read_chain, AlignedChain};
use driftlab::sgns::{read_embeddings, EmbeddingSpace, WordVectors};
use driftlab::shift::{cosine, cumulative_shift};
use driftlab::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    MissingWord = 5,
    Dimension = 6,
    NonFinite = 7,
    Insufficient = 8,
    BufferTooSmall = 9,
    Panic = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DlStatus, msg: impl Into<String>) -> DlStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> DlStatus {
    match e {
        Error::Io(_) | Error::IoAt { .. } => DlStatus::Io,
        Error::Json(_) | Error::Format(_) => DlStatus::Format,
        Error::Config(_) => DlStatus::InvalidArgument,
        Error::MissingWord { .. } => DlStatus::MissingWord,
        Error::Dimension { .. } => DlStatus::Dimension,
        Error::NonFinite(_) => DlStatus::NonFinite,
        Error::Empty(_) | Error::Insufficient(_) => DlStatus::Insufficient,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DlStatus>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(DlStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> DlStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, DlStatus> {
    if p.is_null() {
        return Err(fail(DlStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DlStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], DlStatus> {
    if p.is_null() {
        return Err(fail(DlStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, DlStatus> {
    p.as_mut().ok_or_else(|| fail(DlStatus::NullPointer, format!("`{name}` is null")))
}

/// Message for the last failure on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn dl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Orthogonal `W` (d×d) minimizing `|AW - B|_F` for n×d matrices `a`, `b`.
///
/// # Safety
/// `a` and `b` must point to `n * d` doubles and `out_w` to `d * d` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_procrustes(a: *const f64, b: *const f64, n: usize, d: usize, out_w: *mut f64) -> DlStatus {
    guard(|| {
        if n == 0 || d == 0 {
            return Err(fail(DlStatus::InvalidArgument, "n and d must be positive"));
        }
        let a = DMatrix::from_row_slice(n, d, slice_arg(a, n * d, "a")?);
        let b = DMatrix::from_row_slice(n, d, slice_arg(b, n * d, "b")?);
        if out_w.is_null() {
            return Err(fail(DlStatus::NullPointer, "`out_w` is null"));
        }
        let w = procrustes(&a, &b).map_err(lib)?;
        let out = std::slice::from_raw_parts_mut(out_w, d * d);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = w[(i, j)];
            }
        }
        Ok(())
    })
}

/// Cosine similarity of two d-vectors.
///
/// # Safety
/// `u` and `v` must point to `d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_cosine(u: *const f64, v: *const f64, d: usize, out: *mut f64) -> DlStatus {
    guard(|| {
        let c = cosine(slice_arg(u, d, "u")?, slice_arg(v, d, "v")?).map_err(lib)?;
        *out_arg(out, "out")? = c;
        Ok(())
    })
}

/// One trained embedding space.
pub struct DlEmbedding(EmbeddingSpace);

/// An aligned chain of period spaces.
pub struct DlChain(AlignedChain);

/// Loads an embedding file (binary or text format).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_embedding_open(path: *const c_char, out: *mut *mut DlEmbedding) -> DlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let space = read_embeddings(Path::new(path)).map_err(lib)?;
        *out = Box::into_raw(Box::new(DlEmbedding(space)));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `dl_embedding_open` and not have been freed; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dl_embedding_free(handle: *mut DlEmbedding) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live embedding handle; `dim` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_embedding_shape(handle: *const DlEmbedding, dim: *mut usize, len: *mut usize) -> DlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| fail(DlStatus::NullPointer, "`handle` is null"))?;
        *out_arg(dim, "dim")? = h.0.dim();
        *out_arg(len, "len")? = h.0.len();
        Ok(())
    })
}

/// Copies the vector for `key` into `out` (capacity `cap` doubles).
///
/// # Safety
/// `handle` must be live, `key` NUL-terminated, `out` writable for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_embedding_vector(
    handle: *const DlEmbedding,
    key: *const c_char,
    out: *mut f64,
    cap: usize,
) -> DlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| fail(DlStatus::NullPointer, "`handle` is null"))?;
        copy_vector(&h.0, str_arg(key, "key")?, out, cap)
    })
}

unsafe fn copy_vector<V: WordVectors>(space: &V, key: &str, out: *mut f64, cap: usize) -> Result<(), DlStatus> {
    if out.is_null() {
        return Err(fail(DlStatus::NullPointer, "`out` is null"));
    }
    if cap < space.dim() {
        return Err(fail(DlStatus::BufferTooSmall, format!("need {} doubles, got {cap}", space.dim())));
    }
    let v = space
        .lookup(key)
        .ok_or_else(|| fail(DlStatus::MissingWord, format!("`{key}` is not in the vocabulary")))?;
    std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(&v);
    Ok(())
}

/// Loads an aligned chain written by `driftlab align`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_chain_open(dir: *const c_char, out: *mut *mut DlChain) -> DlStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let out = out_arg(out, "out")?;
        let chain = read_chain(Path::new(dir)).map_err(lib)?;
        *out = Box::into_raw(Box::new(DlChain(chain)));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `dl_chain_open` and not have been freed; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dl_chain_free(handle: *mut DlChain) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live chain handle; `periods` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_chain_shape(handle: *const DlChain, periods: *mut usize, dim: *mut usize) -> DlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| fail(DlStatus::NullPointer, "`handle` is null"))?;
        *out_arg(periods, "periods")? = h.0.len();
        *out_arg(dim, "dim")? = h.0.dim();
        Ok(())
    })
}

/// Aligned vector of `key` in `period`.
///
/// # Safety
/// `handle` must be live, `key` NUL-terminated, `out` writable for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_chain_vector(
    handle: *const DlChain,
    period: usize,
    key: *const c_char,
    out: *mut f64,
    cap: usize,
) -> DlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| fail(DlStatus::NullPointer, "`handle` is null"))?;
        if period >= h.0.len() {
            return Err(fail(DlStatus::InvalidArgument, format!("period {period} out of range")));
        }
        copy_vector(h.0.period(period), str_arg(key, "key")?, out, cap)
    })
}

/// Cumulative shift of `key`. When `per_step` is not NULL it receives the
/// `periods - 1` step values (capacity `cap`).
///
/// # Safety
/// `handle` must be live, `key` NUL-terminated, `cumulative` writable and
/// `per_step` NULL or writable for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_chain_shift(
    handle: *const DlChain,
    key: *const c_char,
    cumulative: *mut f64,
    per_step: *mut f64,
    cap: usize,
) -> DlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| fail(DlStatus::NullPointer, "`handle` is null"))?;
        let score = cumulative_shift(str_arg(key, "key")?, &h.0).map_err(lib)?;
        let out = out_arg(cumulative, "cumulative")?;
        if !per_step.is_null() {
            if cap < score.per_step.len() {
                return Err(fail(
                    DlStatus::BufferTooSmall,
                    format!("need {} doubles, got {cap}", score.per_step.len()),
                ));
            }
            std::slice::from_raw_parts_mut(per_step, score.per_step.len()).copy_from_slice(&score.per_step);
        }
        *out = score.cumulative;
        Ok(())
    })
}
