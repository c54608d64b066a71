//! C ABI over `galaxy-core`.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `_free` function. Every call returns a [`GxStatus`]; on a
//! negative status, `gx_last_error_message` describes the failure on the
//! calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use galaxy_core::formats;
use galaxy_core::strategies::{confidence_sampling_batch, most_likely_positive_batch, random_batch};
use galaxy_core::{ClassId, Error, ExampleId, GalaxySession, LabeledSet, Provenance, ScoreMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of every `gx_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GxStatus {
    Ok = 0,
    /// The session collected its batch; no query is outstanding.
    BatchComplete = 1,
    NullPointer = -1,
    Input = -2,
    Format = -3,
    PoolExhausted = -4,
    OrderExhausted = -5,
    Protocol = -6,
    Io = -7,
    Panic = -99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GxProvenance {
    Bisection = 0,
    FallbackRandom = 1,
    FallbackConfidence = 2,
    SeedRound = 3,
    Baseline = 4,
}

impl From<Provenance> for GxProvenance {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Bisection => GxProvenance::Bisection,
            Provenance::FallbackRandom => GxProvenance::FallbackRandom,
            Provenance::FallbackConfidence => GxProvenance::FallbackConfidence,
            Provenance::SeedRound => GxProvenance::SeedRound,
            Provenance::Baseline => GxProvenance::Baseline,
        }
    }
}

/// One-shot baselines available through `gx_select_baseline`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GxStrategy {
    Confidence = 0,
    /// Most likely positive over classes `0..K-1`.
    Mlp = 1,
    Random = 2,
}

/// Row-major N x K probability matrix.
pub struct GxScores(ScoreMatrix);

/// A GALAXY batch in progress.
pub struct GxSession {
    inner: GalaxySession<ChaCha8Rng>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> GxStatus {
    match e {
        Error::Input(_) => GxStatus::Input,
        Error::Format(_) => GxStatus::Format,
        Error::PoolExhausted => GxStatus::PoolExhausted,
        Error::OrderExhausted { .. } => GxStatus::OrderExhausted,
        Error::Protocol(_) => GxStatus::Protocol,
        Error::Io { .. } => GxStatus::Io,
    }
}

struct Fail(GxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GxStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<GxStatus, Fail>) -> GxStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            GxStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GxStatus::Input, "path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn labeled_from(ids: *const usize, classes: *const usize, n_labeled: usize) -> Result<LabeledSet, Fail> {
    let ids = slice(ids, n_labeled, "ids")?;
    let classes = slice(classes, n_labeled, "classes")?;
    Ok(LabeledSet::from_pairs(
        ids.iter().zip(classes).map(|(&i, &c)| (ExampleId(i), ClassId(c))),
    )?)
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next `gx_*` call on the same thread.
#[no_mangle]
pub extern "C" fn gx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `n * k` row-major probabilities. Rows are renormalized.
#[no_mangle]
pub unsafe extern "C" fn gx_scores_new(data: *const f32, n: usize, k: usize, out: *mut *mut GxScores) -> GxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(k)
            .ok_or_else(|| Fail(GxStatus::Input, "n * k overflows".into()))?;
        let data = slice(data, len, "data")?;
        let s = ScoreMatrix::new(n, k, data.to_vec())?;
        *out = Box::into_raw(Box::new(GxScores(s)));
        Ok(GxStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn gx_scores_read_gxsm(file: *const c_char, out: *mut *mut GxScores) -> GxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = formats::read_gxsm(path(file)?)?;
        *out = Box::into_raw(Box::new(GxScores(s)));
        Ok(GxStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn gx_scores_write_gxsm(scores: *const GxScores, file: *const c_char) -> GxStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(|| null("scores"))?;
        formats::write_gxsm(path(file)?, &s.0)?;
        Ok(GxStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn gx_scores_shape(scores: *const GxScores, n: *mut usize, k: *mut usize) -> GxStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(|| null("scores"))?;
        if n.is_null() || k.is_null() {
            return Err(null("n or k"));
        }
        *n = s.0.n();
        *k = s.0.k();
        Ok(GxStatus::Ok)
    })
}

/// Reads probability `(row, class)` after renormalization.
#[no_mangle]
pub unsafe extern "C" fn gx_scores_get(scores: *const GxScores, row: usize, class: usize, out: *mut f32) -> GxStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(|| null("scores"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if row >= s.0.n() || class >= s.0.k() {
            return Err(Fail(GxStatus::Input, format!("({row}, {class}) out of range")));
        }
        *out = s.0.row(row)[class];
        Ok(GxStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn gx_scores_free(scores: *mut GxScores) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}

/// Starts a batch of `batch_size` queries. `ids[i]` is labeled `classes[i]`;
/// class `K-1` is out-of-distribution. The scores handle may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn gx_session_new(
    scores: *const GxScores,
    ids: *const usize,
    classes: *const usize,
    n_labeled: usize,
    batch_size: usize,
    seed: u64,
    out: *mut *mut GxSession,
) -> GxStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(|| null("scores"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if batch_size == 0 {
            return Err(Fail(GxStatus::Input, "batch_size must be >= 1".into()));
        }
        let labeled = labeled_from(ids, classes, n_labeled)?;
        let inner = GalaxySession::new(&s.0, labeled, batch_size, ChaCha8Rng::seed_from_u64(seed))?;
        *out = Box::into_raw(Box::new(GxSession { inner }));
        Ok(GxStatus::Ok)
    })
}

/// Writes the outstanding query. Returns `GX_STATUS_BATCH_COMPLETE` when the
/// batch has all its labels or the pool is empty. Repeated calls return the
/// same query until it is answered.
#[no_mangle]
pub unsafe extern "C" fn gx_session_next(
    session: *mut GxSession,
    id: *mut usize,
    provenance: *mut GxProvenance,
) -> GxStatus {
    guard(|| {
        let s = session.as_mut().ok_or_else(|| null("session"))?;
        if id.is_null() {
            return Err(null("id"));
        }
        match s.inner.next_query()? {
            Some(q) => {
                *id = q.id.0;
                if !provenance.is_null() {
                    *provenance = q.provenance.into();
                }
                Ok(GxStatus::Ok)
            }
            None => Ok(GxStatus::BatchComplete),
        }
    })
}

/// Answers the outstanding query.
#[no_mangle]
pub unsafe extern "C" fn gx_session_submit(session: *mut GxSession, id: usize, class: usize) -> GxStatus {
    guard(|| {
        let s = session.as_mut().ok_or_else(|| null("session"))?;
        s.inner.submit(ExampleId(id), ClassId(class))?;
        Ok(GxStatus::Ok)
    })
}

/// Current graph order.
#[no_mangle]
pub unsafe extern "C" fn gx_session_ord(session: *const GxSession, out: *mut usize) -> GxStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.inner.ord();
        Ok(GxStatus::Ok)
    })
}

/// Number of labels held, seeds included.
#[no_mangle]
pub unsafe extern "C" fn gx_session_labeled_count(session: *const GxSession, out: *mut usize) -> GxStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.inner.labeled().len();
        Ok(GxStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn gx_session_free(session: *mut GxSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Fills `out_ids` with up to `batch_size` unlabeled ids chosen by a one-shot
/// baseline and writes how many were chosen to `out_len`. `out_ids` must hold
/// `batch_size` entries.
#[no_mangle]
pub unsafe extern "C" fn gx_select_baseline(
    scores: *const GxScores,
    strategy: GxStrategy,
    ids: *const usize,
    classes: *const usize,
    n_labeled: usize,
    batch_size: usize,
    seed: u64,
    out_ids: *mut usize,
    out_len: *mut usize,
) -> GxStatus {
    guard(|| {
        let s = scores.as_ref().ok_or_else(|| null("scores"))?;
        if out_len.is_null() || (batch_size > 0 && out_ids.is_null()) {
            return Err(null("out_ids or out_len"));
        }
        if batch_size == 0 {
            return Err(Fail(GxStatus::Input, "batch_size must be >= 1".into()));
        }
        let labeled = labeled_from(ids, classes, n_labeled)?;
        labeled.validate(s.0.n(), s.0.k())?;
        let batch = match strategy {
            GxStrategy::Confidence => confidence_sampling_batch(&s.0, &labeled, batch_size)?,
            GxStrategy::Mlp => {
                let id_classes: Vec<ClassId> = (0..s.0.k() - 1).map(ClassId).collect();
                most_likely_positive_batch(&s.0, &labeled, batch_size, &id_classes)?
            }
            GxStrategy::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                random_batch(&labeled, s.0.n(), batch_size, &mut rng)?
            }
        };
        let out = std::slice::from_raw_parts_mut(out_ids, batch_size);
        for (slot, id) in out.iter_mut().zip(&batch.ids) {
            *slot = id.0;
        }
        *out_len = batch.ids.len();
        Ok(GxStatus::Ok)
    })
}
