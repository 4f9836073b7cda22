//! C ABI over `otalign`.
//!
//! Every function returns an [`OtaStatus`]. On failure a message is kept per
//! thread and can be fetched with [`ota_last_error_message`]. Sequences cross
//! the boundary as opaque [`OtaSequence`] handles owned by the caller and
//! released with [`ota_sequence_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use otalign::{
    align, build_pool, compute_eer, frechet_distance, gaussian_stats, read_embeddings,
    write_embeddings, EmbeddingSequence, Error, Label, OtError, PoolOrder, ProjectionConfig,
    ProjectionMode, ScoreSet, SinkhornConfig,
};

/// Result code of every call. Numeric values of the first four match the CLI
/// exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtaStatus {
    Ok = 0,
    Invalid = 1,
    Io = 2,
    NotConverged = 3,
    NullPointer = 4,
    Panic = 5,
}

/// Opaque embedding sequence.
pub struct OtaSequence(EmbeddingSequence);

/// Solver and projection settings. Obtain defaults from [`ota_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OtaConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub k: usize,
    /// Nonzero selects the full barycentric map instead of top-k.
    pub full_projection: u8,
}

/// Sinkhorn outcome reported by [`ota_align`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OtaDiagnostics {
    pub iterations_used: usize,
    pub final_violation: f64,
    pub converged: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(OtaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_io() {
            OtaStatus::Io
        } else {
            OtaStatus::Invalid
        };
        Failure(status, e.to_string())
    }
}

impl From<OtError> for Failure {
    fn from(e: OtError) -> Self {
        Failure(OtaStatus::Invalid, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OtaStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<OtaStatus, Failure>) -> OtaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => {
            if status == OtaStatus::Ok {
                set_error("");
            }
            status
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside otalign");
            OtaStatus::Panic
        }
    }
}

unsafe fn seq_ref<'a>(p: *const OtaSequence, what: &str) -> Result<&'a EmbeddingSequence, Failure> {
    p.as_ref().map(|s| &s.0).ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(OtaStatus::Invalid, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn emit(out: *mut *mut OtaSequence, seq: EmbeddingSequence) {
    *out = Box::into_raw(Box::new(OtaSequence(seq)));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ota_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ota_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn ota_config_default() -> OtaConfig {
    let s = SinkhornConfig::default();
    let p = ProjectionConfig::default();
    OtaConfig {
        epsilon: s.epsilon,
        max_iters: s.max_iters,
        tolerance: s.tolerance,
        k: p.k,
        full_projection: 0,
    }
}

/// Copies `frames * dim` row-major values into a new sequence.
///
/// # Safety
/// `data` must point to `frames * dim` readable floats and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ota_sequence_from_f32(
    data: *const f32,
    frames: usize,
    dim: usize,
    out: *mut *mut OtaSequence,
) -> OtaStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = frames
            .checked_mul(dim)
            .ok_or_else(|| Failure(OtaStatus::Invalid, "frames * dim overflows".into()))?;
        let values = std::slice::from_raw_parts(data, len);
        let seq =
            EmbeddingSequence::new(dim, values.iter().map(|&v| f64::from(v)).collect(), "ffi")?;
        emit(out, seq);
        Ok(OtaStatus::Ok)
    })
}

/// Loads an EMB1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ota_sequence_read(
    path: *const c_char,
    out: *mut *mut OtaSequence,
) -> OtaStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        emit(out, read_embeddings(&path)?);
        Ok(OtaStatus::Ok)
    })
}

/// Writes an EMB1 file atomically.
///
/// # Safety
/// `seq` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ota_sequence_write(
    seq: *const OtaSequence,
    path: *const c_char,
) -> OtaStatus {
    guard(|| {
        let seq = seq_ref(seq, "seq")?;
        write_embeddings(seq, path_arg(path)?)?;
        Ok(OtaStatus::Ok)
    })
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ota_sequence_frames(seq: *const OtaSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Frame dimension, or 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ota_sequence_dim(seq: *const OtaSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the values, row-major, into `buf` of capacity `len` floats.
///
/// # Safety
/// `seq` must be a live handle and `buf` writable for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn ota_sequence_copy_f32(
    seq: *const OtaSequence,
    buf: *mut f32,
    len: usize,
) -> OtaStatus {
    guard(|| {
        let seq = seq_ref(seq, "seq")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let values = seq.as_slice();
        if len < values.len() {
            return Err(Failure(
                OtaStatus::Invalid,
                format!("buffer holds {len} values, sequence has {}", values.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, values.len());
        for (d, v) in dst.iter_mut().zip(values) {
            *d = *v as f32;
        }
        Ok(OtaStatus::Ok)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `seq` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ota_sequence_free(seq: *mut OtaSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Transports `source` onto the concatenation of `pool[0..pool_len]` (in the
/// given order). On success or `NotConverged`, `*out` receives a new handle
/// and `diagnostics`, if non-null, is filled.
///
/// # Safety
/// All handles must be live, `pool` must hold `pool_len` handles, `config`
/// may be null for defaults, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ota_align(
    source: *const OtaSequence,
    pool: *const *const OtaSequence,
    pool_len: usize,
    config: *const OtaConfig,
    out: *mut *mut OtaSequence,
    diagnostics: *mut OtaDiagnostics,
) -> OtaStatus {
    guard(|| {
        let source = seq_ref(source, "source")?;
        if pool.is_null() {
            return Err(null("pool"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let mut utts = Vec::with_capacity(pool_len);
        for &p in std::slice::from_raw_parts(pool, pool_len) {
            utts.push(seq_ref(p, "pool entry")?.clone());
        }
        let cfg = config
            .as_ref()
            .copied()
            .unwrap_or_else(|| ota_config_default());
        let sinkhorn_cfg = SinkhornConfig {
            epsilon: cfg.epsilon,
            max_iters: cfg.max_iters,
            tolerance: cfg.tolerance,
        };
        let proj_cfg = ProjectionConfig {
            k: cfg.k,
            mode: if cfg.full_projection != 0 {
                ProjectionMode::Full
            } else {
                ProjectionMode::TopK
            },
        };
        let pool = build_pool(&utts, PoolOrder::AsGiven)?;
        let result = align(source, &pool, &sinkhorn_cfg, &proj_cfg)?;
        let d = result.diagnostics;
        if let Some(slot) = diagnostics.as_mut() {
            *slot = OtaDiagnostics {
                iterations_used: d.iterations_used,
                final_violation: d.final_violation,
                converged: d.converged() as u8,
            };
        }
        emit(out, result.transported);
        if d.converged() {
            Ok(OtaStatus::Ok)
        } else {
            Err(Failure(
                OtaStatus::NotConverged,
                format!(
                    "Sinkhorn stopped after {} iterations with marginal violation {:e}",
                    d.iterations_used, d.final_violation
                ),
            ))
        }
    })
}

/// Equal error rate of `n` trials. `labels[i]` is nonzero for bona fide.
///
/// # Safety
/// `labels` and `scores` must hold `n` entries; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ota_eer(
    labels: *const u8,
    scores: *const f64,
    n: usize,
    out_rate: *mut f64,
    out_threshold: *mut f64,
) -> OtaStatus {
    guard(|| {
        if labels.is_null() || scores.is_null() {
            return Err(null("labels or scores"));
        }
        if out_rate.is_null() || out_threshold.is_null() {
            return Err(null("output"));
        }
        let labels = std::slice::from_raw_parts(labels, n);
        let scores = std::slice::from_raw_parts(scores, n);
        let set = ScoreSet::from_pairs(labels.iter().zip(scores).map(|(&l, &s)| {
            (
                if l != 0 {
                    Label::Bonafide
                } else {
                    Label::Spoof
                },
                s,
            )
        }));
        let eer = compute_eer(&set)?;
        *out_rate = eer.rate;
        *out_threshold = eer.threshold;
        Ok(OtaStatus::Ok)
    })
}

/// Fréchet distance between the Gaussian fits of two sequences.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ota_fad(
    a: *const OtaSequence,
    b: *const OtaSequence,
    out: *mut f64,
) -> OtaStatus {
    guard(|| {
        let a = seq_ref(a, "a")?;
        let b = seq_ref(b, "b")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = frechet_distance(&gaussian_stats(a)?, &gaussian_stats(b)?)?;
        Ok(OtaStatus::Ok)
    })
}
